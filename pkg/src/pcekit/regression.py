"""Least-squares estimation of expansion coefficients.

The design matrix has one row per sample and one column per basis term. Its
thin QR factorization is computed once and shared by every output channel
fitted against the same design.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from . import schemas
from .basis import BasisSpec, eval_basis
from .errors import (BadResponseError, DimensionMismatchError, IllConditionedDesignError,
                     UndersamplingError, UnknownChannelError)
from .sampling import SampleDesign

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
SCHEMA_TAG = "pcekit.surrogate/1"


class Factorization(NamedTuple):
    q: np.ndarray
    r: np.ndarray
    condition: float
    leverage: np.ndarray


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    spec: BasisSpec = field(repr=False)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @cached_property
    def factorization(self) -> Factorization:
        q, r = np.linalg.qr(self.values, mode="reduced")
        sv = np.linalg.svd(r, compute_uv=False)
        condition = math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])
        return Factorization(q, r, condition, np.sum(q * q, axis=1))


def build_design(spec: BasisSpec, design: SampleDesign | np.ndarray) -> DesignMatrix:
    """Evaluate the basis at every germ row of ``design``."""
    germ = design.germ if isinstance(design, SampleDesign) else np.atleast_2d(np.asarray(design, dtype=float))
    if germ.shape[1] != spec.n:
        raise DimensionMismatchError(f"design has n={germ.shape[1]}, basis has n={spec.n}")
    if germ.shape[0] < len(spec):
        raise UndersamplingError(germ.shape[0], len(spec))
    values = eval_basis(spec, germ)
    values.setflags(write=False)
    return DesignMatrix(values, spec)


def _check_response(A: DesignMatrix, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (A.m,):
        raise DimensionMismatchError(f"response has shape {b.shape}, design has m={A.m}")
    bad = np.flatnonzero(~np.isfinite(b))
    if bad.size:
        raise BadResponseError(bad.tolist())
    return b


def is_constant(b: np.ndarray) -> bool:
    """True when every response equals the first, up to ~1e-13 relative."""
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.ptp(b)) <= 1e-13 * scale


def fit(A: DesignMatrix, b, condition_limit: float = CONDITION_LIMIT) -> np.ndarray:
    """Least-squares coefficients minimizing ||A u - b||, by QR."""
    b = _check_response(A, b)
    fac = A.factorization
    if fac.condition > condition_limit:
        raise IllConditionedDesignError(fac.condition, condition_limit)
    if is_constant(b):
        u = np.zeros(len(A.spec))
        u[0] = float(np.mean(b))
        return u
    return solve_triangular(fac.r, fac.q.T @ b)


def fit_normal_equations(A: DesignMatrix, b) -> np.ndarray:
    """Explicit (A^T A)^{-1} A^T b. Reference only; squares the condition number."""
    b = _check_response(A, b)
    M = A.values
    return np.linalg.solve(M.T @ M, M.T @ b)


class LooError(NamedTuple):
    value: float
    degenerate: bool


def loo_error(A: DesignMatrix, b, coefficients) -> LooError:
    """Leave-one-out mean squared error over the sample variance of ``b``.

    Uses the hat-matrix identity ``e_i / (1 - h_i)`` so no refits are done.
    """
    b = _check_response(A, b)
    var = float(np.var(b, ddof=1)) if A.m > 1 else 0.0
    if var == 0.0 or is_constant(b):
        return LooError(0.0, True)
    resid = b - A.values @ np.asarray(coefficients, dtype=float)
    denom = 1.0 - A.factorization.leverage
    if np.any(denom <= 1e-12):
        return LooError(math.inf, False)
    return LooError(float(np.mean((resid / denom) ** 2) / var), False)


@dataclass(frozen=True)
class ChannelFit:
    coefficients: np.ndarray
    residual_norm: float
    loo: float
    condition: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "diagnostics": {
                "residual_norm": self.residual_norm,
                "loo": self.loo if math.isfinite(self.loo) else None,
                "condition": self.condition,
                "degenerate": self.degenerate,
            },
        }

    @classmethod
    def from_dict(cls, doc):
        d = doc["diagnostics"]
        coeffs = np.array(doc["coefficients"], dtype=float)
        coeffs.setflags(write=False)
        loo = math.inf if d["loo"] is None else float(d["loo"])
        return cls(coeffs, float(d["residual_norm"]), loo, float(d["condition"]), bool(d["degenerate"]))


def fit_channel(A: DesignMatrix, b, condition_limit: float = CONDITION_LIMIT) -> ChannelFit:
    """Fit one response vector and collect its diagnostics."""
    b = _check_response(A, b)
    u = fit(A, b, condition_limit)
    u.setflags(write=False)
    loo = loo_error(A, b, u)
    residual = float(np.linalg.norm(A.values @ u - b))
    return ChannelFit(u, residual, loo.value, A.factorization.condition, loo.degenerate)


@dataclass(frozen=True)
class SurrogateModel:
    spec: BasisSpec
    channels: Mapping[str, ChannelFit]
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for name, ch in self.channels.items():
            if len(ch.coefficients) != len(self.spec):
                raise ValueError(f"channel {name!r}: {len(ch.coefficients)} coefficients for {len(self.spec)} terms")

    def channel(self, name: str) -> ChannelFit:
        try:
            return self.channels[name]
        except KeyError:
            raise UnknownChannelError(name) from None

    def coefficients(self, name: str) -> np.ndarray:
        return self.channel(name).coefficients

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_TAG,
            "basis": self.spec.to_dict(),
            "channels": {k: v.to_dict() for k, v in self.channels.items()},
            "meta": dict(self.meta),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict, source="<surrogate>") -> "SurrogateModel":
        schemas.validate(doc, schemas.SURROGATE, source)
        spec = BasisSpec.from_dict(doc["basis"])
        channels = {k: ChannelFit.from_dict(v) for k, v in doc["channels"].items()}
        return cls(spec, channels, doc.get("meta", {}))

    @classmethod
    def from_json(cls, text: str, source="<surrogate>") -> "SurrogateModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise schemas.SchemaValidationError(source, "", f"not valid JSON: {exc}") from None
        return cls.from_dict(doc, source)


def fit_surrogate(A: DesignMatrix, responses: Mapping[str, np.ndarray], meta=None,
                  condition_limit: float = CONDITION_LIMIT) -> SurrogateModel:
    """Fit every named response against one shared design."""
    channels = {}
    for name, b in responses.items():
        channels[name] = fit_channel(A, b, condition_limit)
        if channels[name].degenerate:
            log.debug("channel %s has zero variance; fitted as a constant", name)
    return SurrogateModel(A.spec, channels, dict(meta or {}))


def predict(model: SurrogateModel, channel: str, germ):
    """Surrogate value at one germ vector (float) or at rows of a matrix (array)."""
    u = model.coefficients(channel)
    out = eval_basis(model.spec, germ) @ u
    return float(out) if np.ndim(out) == 0 else out
