"""Total-degree multivariate basis built from tensor products of 1D families.

Multi-indices are ordered graded-lexicographically: ascending total degree,
and within one degree descending in the first coordinate, then the second,
and so on. For ``n=2, p=2`` this gives::

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import BasisTooLargeError, DimensionMismatchError, ForeignIndexError
from .polynomials import PolynomialFamily, eval_table, family_by_name, norm_sq_1d

MultiIndex = tuple  # tuple[int, ...] of per-dimension degrees

MAX_TERMS = 100_000
ORDERING = "graded-lex"


def basis_size(n: int, p: int) -> int:
    """Number of total-degree terms, (p+n)! / (p! n!)."""
    return math.comb(p + n, n)


def _compositions(n, total):
    """All n-tuples of nonnegative ints summing to ``total``, first coordinate descending."""
    if n == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(n - 1, total - head):
            yield (head,) + tail


@dataclass(frozen=True)
class BasisSpec:
    n: int
    p: int
    families: tuple
    indices: tuple = field(repr=False)

    @cached_property
    def index_array(self) -> np.ndarray:
        """Indices as an int array of shape (P+1, n)."""
        arr = np.array(self.indices, dtype=int).reshape(len(self.indices), self.n)
        arr.setflags(write=False)
        return arr

    @cached_property
    def norms(self) -> np.ndarray:
        """Squared norm of every basis term, in index order."""
        per_dim = [np.array([norm_sq_1d(f, d) for d in range(self.p + 1)]) for f in self.families]
        out = np.ones(len(self.indices))
        for k, table in enumerate(per_dim):
            out = out * table[self.index_array[:, k]]
        out.setflags(write=False)
        return out

    @cached_property
    def position(self) -> dict:
        return {idx: j for j, idx in enumerate(self.indices)}

    def __len__(self):
        return len(self.indices)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "families": [f.name for f in self.families],
            "ordering": ORDERING,
            "indices": [list(i) for i in self.indices],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BasisSpec":
        if doc.get("ordering", ORDERING) != ORDERING:
            raise ValueError(f"unsupported basis ordering {doc['ordering']!r}")
        spec = total_degree_set(doc["n"], doc["p"], [family_by_name(f) for f in doc["families"]])
        stored = doc.get("indices")
        if stored is not None and [tuple(i) for i in stored] != list(spec.indices):
            raise ValueError("stored multi-indices do not match the regenerated basis")
        return spec


def total_degree_set(n: int, p: int, families: Sequence[PolynomialFamily] | PolynomialFamily,
                     max_terms: int = MAX_TERMS) -> BasisSpec:
    """Build the total-degree basis of order ``p`` in ``n`` dimensions.

    ``families`` is one family per dimension, or a single family used for all.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    if isinstance(families, PolynomialFamily):
        families = [families] * n
    families = tuple(families)
    if len(families) != n:
        raise DimensionMismatchError(f"{len(families)} families given for n={n}")
    count = basis_size(n, p)
    if count > max_terms:
        raise BasisTooLargeError(count, max_terms)
    indices = tuple(idx for total in range(p + 1) for idx in _compositions(n, total))
    return BasisSpec(n, p, families, indices)


def eval_basis(spec: BasisSpec, germ) -> np.ndarray:
    """Evaluate every basis term at one germ vector (returns P+1) or rows of a matrix (m, P+1)."""
    xi = np.asarray(germ, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != spec.n:
        raise DimensionMismatchError(f"germ has {xi.shape[1]} coordinates, basis has n={spec.n}")
    out = np.ones((xi.shape[0], len(spec)))
    for k, fam in enumerate(spec.families):
        table = eval_table(fam, spec.p, xi[:, k])
        out *= table[:, spec.index_array[:, k]]
    return out[0] if single else out


def norm_sq(spec: BasisSpec, index: MultiIndex) -> float:
    """Squared norm of one basis term, the product of its 1D norms."""
    j = spec.position.get(tuple(index))
    if j is None:
        raise ForeignIndexError(f"index {tuple(index)} is not in the basis")
    return float(spec.norms[j])


def supports(spec: BasisSpec) -> np.ndarray:
    """Boolean (P+1, n) mask: dimension k is active in term j."""
    return spec.index_array > 0
