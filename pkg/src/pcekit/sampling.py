"""Input uncertainty model and Monte Carlo designs.

Each input has a marginal distribution with a standardization to its germ
variable: Normal inputs map to a standard normal germ (Hermite basis), Uniform
inputs to a uniform germ on [-1, 1] (Legendre basis).

Random numbers come from a counter-based generator: the uniform variate for
sample ``r``, dimension ``k`` depends only on ``(seed, r, k)``, so designs are
prefix-consistent and reproducible regardless of how they are generated.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DimensionMismatchError, SupportError
from .polynomials import HERMITE, LEGENDRE, PolynomialFamily

SCHEME = "MonteCarlo"
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    kind = "normal"

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.std)):
            raise ValueError(f"Normal std must be positive, got {self.std}")
        if not math.isfinite(self.mean):
            raise ValueError(f"Normal mean must be finite, got {self.mean}")

    @property
    def family(self) -> PolynomialFamily:
        return HERMITE

    def to_germ(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def from_germ(self, xi):
        return self.mean + self.std * np.asarray(xi, dtype=float)

    def pdf(self, x):
        z = self.to_germ(x)
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi))

    def cdf(self, x):
        return ndtr(self.to_germ(x))

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high) and self.high > self.low):
            raise ValueError(f"Uniform needs finite low < high, got ({self.low}, {self.high})")

    @property
    def family(self) -> PolynomialFamily:
        return LEGENDRE

    def to_germ(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < self.low) | (x > self.high)):
            raise SupportError(f"value outside Uniform({self.low}, {self.high}) support")
        return 2.0 * (x - self.low) / (self.high - self.low) - 1.0

    def from_germ(self, xi):
        return self.low + 0.5 * (np.asarray(xi, dtype=float) + 1.0) * (self.high - self.low)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.low) & (x <= self.high), 1.0 / (self.high - self.low), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "low": self.low, "high": self.high}


Distribution = Normal | Uniform


def distribution_from_dict(doc: dict) -> Distribution:
    kind = doc.get("kind", "").lower()
    if kind == "normal":
        return Normal(float(doc["mean"]), float(doc["std"]))
    if kind == "uniform":
        return Uniform(float(doc["low"]), float(doc["high"]))
    raise ValueError(f"unknown distribution kind {doc.get('kind')!r}")


def to_germ(x, dist: Distribution):
    """Standardize a physical value (scalar or array) to its germ coordinate."""
    out = dist.to_germ(x)
    return float(out) if np.ndim(out) == 0 else out


def from_germ(xi, dist: Distribution):
    out = dist.from_germ(xi)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class InputVariable:
    name: str
    distribution: Distribution
    units: str = ""

    def to_dict(self):
        return {"name": self.name, "distribution": self.distribution.to_dict(), "units": self.units}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["name"], distribution_from_dict(doc["distribution"]), doc.get("units", ""))


def check_unique_names(inputs: Sequence[InputVariable]):
    seen = set()
    for var in inputs:
        if var.name in seen:
            raise ValueError(f"duplicate input name {var.name!r}")
        seen.add(var.name)


def families(inputs: Sequence[InputVariable]) -> list[PolynomialFamily]:
    """Basis family paired with each input's distribution."""
    return [v.distribution.family for v in inputs]


def joint_density(inputs: Sequence[InputVariable], x) -> float:
    """Product of marginal densities at the physical point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(inputs),):
        raise DimensionMismatchError(f"point has shape {x.shape}, expected ({len(inputs)},)")
    return float(np.prod([v.distribution.pdf(xk) for v, xk in zip(inputs, x)]))


def uniform_stream(seed: int, dim: int, m: int, start: int = 0) -> np.ndarray:
    """Uniform(0, 1) variates for rows ``start .. start+m-1`` of dimension ``dim``.

    Each row is one Philox counter block keyed by ``(seed, dim)``; the top 53
    bits of its first word become an open-interval double.
    """
    seed = int(seed) & _U64
    bitgen = np.random.Philox(key=np.array([seed, dim], dtype=np.uint64),
                              counter=np.array([start, 0, 0, 0], dtype=np.uint64))
    raw = bitgen.random_raw(4 * m).reshape(m, 4)[:, 0]
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53


@dataclass(frozen=True)
class SampleDesign:
    inputs: tuple
    physical: np.ndarray
    germ: np.ndarray
    seed: int
    scheme: str = SCHEME

    @property
    def m(self) -> int:
        return self.physical.shape[0]

    @property
    def n(self) -> int:
        return self.physical.shape[1]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.inputs]

    def sidecar(self) -> dict:
        return {
            "seed": self.seed,
            "scheme": self.scheme,
            "m": self.m,
            "inputs": [v.to_dict() for v in self.inputs],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.physical:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_files(cls, csv_text: str, sidecar: dict) -> "SampleDesign":
        inputs = tuple(InputVariable.from_dict(d) for d in sidecar["inputs"])
        rows = list(csv.reader(io.StringIO(csv_text)))
        header, body = rows[0], rows[1:]
        if header != [v.name for v in inputs]:
            raise ValueError(f"design header {header} does not match sidecar inputs")
        physical = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(inputs))
        return _make(inputs, physical, int(sidecar["seed"]), sidecar.get("scheme", SCHEME))


def _make(inputs, physical, seed, scheme=SCHEME):
    germ = np.column_stack([v.distribution.to_germ(physical[:, k]) for k, v in enumerate(inputs)]) \
        if inputs else np.empty((physical.shape[0], 0))
    physical.setflags(write=False)
    germ.setflags(write=False)
    return SampleDesign(tuple(inputs), physical, germ, seed, scheme)


def sample(inputs: Sequence[InputVariable], m: int, seed: int) -> SampleDesign:
    """Draw ``m`` independent rows from the product of the input marginals."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    check_unique_names(inputs)
    cols = []
    for k, var in enumerate(inputs):
        xi = var.distribution.family.from_uniform(uniform_stream(seed, k, m))
        cols.append(var.distribution.from_germ(xi))
    physical = np.column_stack(cols) if cols else np.empty((m, 0))
    return _make(tuple(inputs), physical, int(seed))


def sample_germ(families_: Sequence[PolynomialFamily], m: int, seed: int) -> np.ndarray:
    """Draw ``m`` rows directly in germ space (used to resample a surrogate)."""
    return np.column_stack([f.from_uniform(uniform_stream(seed, k, m)) for k, f in enumerate(families_)])


def sidecar_json(design: SampleDesign) -> str:
    return json.dumps(design.sidecar(), indent=2) + "\n"
