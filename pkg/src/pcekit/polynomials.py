"""One-dimensional orthogonal polynomial families.

Each family carries its probability weight (unit mass, so ``psi_0 == 1`` has
unit norm), a three-term recurrence used for all evaluation, closed-form
squared norms and a Gauss rule built from the same recurrence.

    >>> eval_1d(HERMITE, 2, 2.0)
    3.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import ndtri

from .errors import DegreeOverflowError

MAX_DEGREE = 32
MAX_GAUSS_POINTS = 64
NEWTON_STEPS = 2

_REGISTRY: dict[str, "PolynomialFamily"] = {}


class PolynomialFamily:
    """Base class for an orthogonal family under a probability weight.

    Subclasses provide the recurrence
    ``psi_{n+1}(x) = (a_n x + b_n) psi_n(x) - c_n psi_{n-1}(x)``, the monic
    Jacobi coefficients used by the Gauss rule, the squared norms, and the
    weight itself. Instances register themselves by ``name`` so that JSON
    documents can refer to them.
    """

    name: str = ""
    support: tuple[float, float] = (-math.inf, math.inf)
    symmetric: bool = False

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.name:
            _REGISTRY[cls.name] = cls()

    def recurrence(self, n: int) -> tuple[float, float, float]:
        raise NotImplementedError

    def jacobi(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal (length k) and off-diagonal (length k-1) of the Jacobi matrix."""
        raise NotImplementedError

    def norm_sq(self, n: int) -> float:
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def from_uniform(self, u):
        """Map uniform(0, 1) draws to draws from the weight (inverse CDF)."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))


class HermiteProbabilists(PolynomialFamily):
    """He_n, orthogonal under the standard normal density."""

    name = "hermite"
    symmetric = True

    def recurrence(self, n):
        return 1.0, 0.0, float(n)

    def jacobi(self, k):
        return np.zeros(k), np.sqrt(np.arange(1, k, dtype=float))

    def norm_sq(self, n):
        return float(math.factorial(n))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    def from_uniform(self, u):
        return ndtri(u)


class Legendre(PolynomialFamily):
    """P_n with P_n(1) = 1, orthogonal under the uniform density 1/2 on [-1, 1]."""

    name = "legendre"
    support = (-1.0, 1.0)
    symmetric = True

    def recurrence(self, n):
        return (2.0 * n + 1.0) / (n + 1.0), 0.0, n / (n + 1.0)

    def jacobi(self, k):
        n = np.arange(1, k, dtype=float)
        return np.zeros(k), n / np.sqrt(4.0 * n * n - 1.0)

    def norm_sq(self, n):
        return 1.0 / (2.0 * n + 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= -1.0) & (x <= 1.0), 0.5, 0.0)

    def from_uniform(self, u):
        return 2.0 * np.asarray(u, dtype=float) - 1.0


HERMITE = _REGISTRY["hermite"]
LEGENDRE = _REGISTRY["legendre"]


def family_by_name(name: str) -> PolynomialFamily:
    try:
        return _REGISTRY[name.lower()]
    except KeyError:
        raise ValueError(f"unknown polynomial family {name!r}; known: {sorted(_REGISTRY)}") from None


def _check_degree(degree, max_degree):
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    if degree > max_degree:
        raise DegreeOverflowError(f"degree {degree} exceeds maximum {max_degree}")


def eval_table(family: PolynomialFamily, max_deg: int, points, max_degree: int = MAX_DEGREE) -> np.ndarray:
    """Evaluate psi_0 .. psi_max_deg at every point.

    Returns an array of shape ``points.shape + (max_deg + 1,)``.
    """
    _check_degree(max_deg, max_degree)
    x = np.asarray(points, dtype=float)
    out = np.empty(x.shape + (max_deg + 1,))
    out[..., 0] = 1.0
    if max_deg >= 1:
        a, b, _ = family.recurrence(0)
        out[..., 1] = a * x + b
    for n in range(1, max_deg):
        a, b, c = family.recurrence(n)
        out[..., n + 1] = (a * x + b) * out[..., n] - c * out[..., n - 1]
    return out


def eval_1d(family: PolynomialFamily, degree: int, point, max_degree: int = MAX_DEGREE):
    """psi_degree(point) by the three-term recurrence.

    ``point`` may be a scalar (a float is returned) or an array.
    """
    values = eval_table(family, degree, point, max_degree)[..., degree]
    return float(values) if values.ndim == 0 else values


def norm_sq_1d(family: PolynomialFamily, degree: int, max_degree: int = MAX_DEGREE) -> float:
    """Squared norm <psi_degree^2> under the family's unit-mass weight."""
    _check_degree(degree, max_degree)
    return family.norm_sq(degree)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        """Weighted sum of ``f(nodes)``, summed outside-in so symmetric rules cancel odd terms exactly."""
        vals = self.weights * f(self.nodes)
        half = len(vals) // 2
        paired = vals[:half] + vals[::-1][:half]
        return float(np.sum(paired) + (vals[half] if len(vals) % 2 else 0.0))


def _value_and_slope(family, degree, x):
    """psi_degree(x) and its derivative, by differentiating the recurrence."""
    prev, cur = np.zeros_like(x), np.ones_like(x)
    dprev, dcur = np.zeros_like(x), np.zeros_like(x)
    for n in range(degree):
        a, b, c = family.recurrence(n)
        prev, cur, dprev, dcur = cur, (a * x + b) * cur - c * prev, dcur, a * cur + (a * x + b) * dcur - c * dprev
    return cur, dcur


def gauss_rule(family: PolynomialFamily, points: int) -> QuadratureRule:
    """Gauss rule for the family weight, weights summing to 1.

    Nodes are eigenvalues of the Jacobi matrix, polished by Newton steps on
    the recurrence (the eigensolver alone leaves them a few ulp off). Weights come from the
    Christoffel function ``1 / sum_n psi_n(x)^2 / <psi_n^2>`` rather than from
    eigenvectors, which lose the tiny tail weights of wide rules.
    """
    if not 1 <= points <= MAX_GAUSS_POINTS:
        raise ValueError(f"points must be in [1, {MAX_GAUSS_POINTS}], got {points}")
    diag, off = family.jacobi(points)
    nodes = diag.copy() if points == 1 else eigh_tridiagonal(diag, off, eigvals_only=True)
    for _ in range(NEWTON_STEPS):
        value, slope = _value_and_slope(family, points, nodes)
        nodes = nodes - value / slope
    if family.symmetric:
        nodes = 0.5 * (nodes - nodes[::-1])
    table = eval_table(family, points - 1, nodes, max_degree=MAX_GAUSS_POINTS)
    norms = np.array([family.norm_sq(n) for n in range(points)])
    weights = 1.0 / np.sum(table ** 2 / norms, axis=1)
    if family.symmetric:
        weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)
