"""Moments, output densities and Sobol indices of a fitted surrogate.

All statistics come straight from the coefficients: the mean is the constant
coefficient and each non-constant term contributes ``u_a^2 * <psi_a^2>`` to
the variance. A term belongs to the ANOVA component of exactly the set of
dimensions in which its multi-index is nonzero, which gives first-order,
total and group Sobol indices as partial sums of those contributions.

Dimensions are 0-based throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .basis import supports
from .errors import DegenerateVarianceError
from .regression import SurrogateModel, predict
from .sampling import sample_germ

SIGMA_BAND = 3.0
MAX_BINS = 4096
KERNEL_GRID = 512


def mean(model: SurrogateModel, channel: str) -> float:
    return float(model.coefficients(channel)[0])


def _contributions(model, channel):
    u = model.coefficients(channel)
    c = u * u * model.spec.norms
    c[0] = 0.0
    return c


def variance(model: SurrogateModel, channel: str) -> float:
    return float(np.sum(_contributions(model, channel)))


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    degenerate: bool = False

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def band(self) -> tuple[float, float]:
        return (self.mean - SIGMA_BAND * self.std, self.mean + SIGMA_BAND * self.std)


def moments(model: SurrogateModel, channel: str) -> MomentSummary:
    v = variance(model, channel)
    return MomentSummary(mean(model, channel), v, _is_degenerate(model, channel, v))


def _is_degenerate(model, channel, var):
    return var <= 0.0 or model.channel(channel).degenerate


def _checked(model, channel):
    c = _contributions(model, channel)
    total = float(np.sum(c))
    if _is_degenerate(model, channel, total):
        raise DegenerateVarianceError(f"channel {channel!r} has zero variance; Sobol indices undefined")
    return c, total, supports(model.spec)


def sobol_first(model: SurrogateModel, channel: str, i: int) -> float:
    """Share of variance from terms active only in dimension ``i``."""
    c, total, act = _checked(model, channel)
    only_i = act[:, i] & (act.sum(axis=1) == 1)
    return float(np.sum(c[only_i]) / total)


def sobol_total(model: SurrogateModel, channel: str, i: int) -> float:
    """Share of variance from all terms in which dimension ``i`` is active."""
    c, total, act = _checked(model, channel)
    return float(np.sum(c[act[:, i]]) / total)


def sobol_group(model: SurrogateModel, channel: str, dims: Iterable[int]) -> float:
    """Share of variance from terms whose active dimensions are exactly ``dims``."""
    dims = sorted(set(dims))
    if not dims:
        raise ValueError("dimension subset must be nonempty")
    c, total, act = _checked(model, channel)
    want = np.zeros(model.spec.n, dtype=bool)
    want[dims] = True
    return float(np.sum(c[np.all(act == want, axis=1)]) / total)


@dataclass(frozen=True)
class SobolResult:
    first_order: np.ndarray
    total: np.ndarray
    groups: dict = field(default_factory=dict)


def sobol_indices(model: SurrogateModel, channel: str, with_groups: bool = True) -> SobolResult:
    """All first-order and total indices, plus every nonempty group index."""
    c, total, act = _checked(model, channel)
    n = model.spec.n
    order = act.sum(axis=1)
    first = np.array([np.sum(c[act[:, i] & (order == 1)]) for i in range(n)]) / total
    tot = np.array([np.sum(c[act[:, i]]) for i in range(n)]) / total
    groups = {}
    if with_groups:
        for j in range(1, len(c)):
            key = tuple(np.flatnonzero(act[j]).tolist())
            groups[key] = groups.get(key, 0.0) + c[j]
        groups = {k: float(v / total) for k, v in sorted(groups.items(), key=lambda kv: (len(kv[0]), kv[0]))}
    return SobolResult(first, tot, groups)


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    method: str
    degenerate: bool = False


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def surrogate_pdf(model: SurrogateModel, channel: str, resamples: int = 100_000, seed: int = 0,
                  method: str = "histogram") -> DensityEstimate:
    """Density of the surrogate output under the germ law, by resampling.

    ``histogram`` uses Freedman-Diaconis bins (grid at bin centres);
    ``kernel`` uses a Gaussian KDE with Silverman's bandwidth. Either estimate
    is rescaled to integrate to one under the trapezoid rule.
    """
    if resamples < 1000:
        raise ValueError(f"resamples must be >= 1000, got {resamples}")
    if method not in ("histogram", "kernel"):
        raise ValueError(f"unknown density method {method!r}")
    if _is_degenerate(model, channel, variance(model, channel)):
        return DensityEstimate(np.array([mean(model, channel)]), np.array([1.0]), method, degenerate=True)

    values = predict(model, channel, sample_germ(model.spec.families, resamples, seed))
    if method == "histogram":
        edges = np.histogram_bin_edges(values, bins="fd")
        if len(edges) - 1 > MAX_BINS:
            edges = np.linspace(values.min(), values.max(), MAX_BINS + 1)
        dens, edges = np.histogram(values, bins=edges, density=True)
        grid = 0.5 * (edges[1:] + edges[:-1])
    else:
        kde = stats.gaussian_kde(values, bw_method="silverman")
        pad = 3.0 * kde.factor * float(np.std(values, ddof=1))
        grid = np.linspace(values.min() - pad, values.max() + pad, KERNEL_GRID)
        dens = kde(grid)
    area = _trapezoid(dens, grid)
    return DensityEstimate(grid, dens / area, method)


@dataclass(frozen=True)
class TimeseriesRow:
    time: float | None
    mean: float
    std: float
    lower: float
    upper: float
    first_order: tuple | None
    total: tuple | None
    degenerate: bool


def timeseries_summary(models: Sequence[tuple[float | None, SurrogateModel]], channel: str) -> list[TimeseriesRow]:
    """One row per timestep: moments, 3-sigma band and Sobol indices.

    Degenerate (zero-variance) steps carry ``degenerate=True`` and no indices.
    """
    times = [t for t, _ in models]
    if len(models) > 1:
        if any(t is None for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("timestep times must be strictly increasing")
    rows = []
    for t, model in models:
        ms = moments(model, channel)
        lo, hi = ms.band
        if ms.degenerate:
            first = total = None
        else:
            sob = sobol_indices(model, channel, with_groups=False)
            first, total = tuple(sob.first_order.tolist()), tuple(sob.total.tolist())
        rows.append(TimeseriesRow(t, ms.mean, ms.std, lo, hi, first, total, ms.degenerate))
    return rows


# CSV emitters. Header names are fixed; floats use repr so they round-trip exactly.

MOMENTS_HEADER = ["time", "channel", "mean", "std", "lower_3sigma", "upper_3sigma", "degenerate"]
SOBOL_HEADER = ["time", "channel", "dimension", "first_order", "total_order", "degenerate"]
PDF_HEADER = ["abscissa", "density"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return repr(float(x))


def _write(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def moments_csv(summaries: dict[str, list[TimeseriesRow]]) -> str:
    rows = []
    for channel, series in summaries.items():
        for r in series:
            rows.append([_fmt(r.time), channel, _fmt(r.mean), _fmt(r.std), _fmt(r.lower), _fmt(r.upper),
                         _fmt(r.degenerate)])
    return _write(MOMENTS_HEADER, rows)


def sobol_csv(summaries: dict[str, list[TimeseriesRow]], names: Sequence[str]) -> str:
    rows = []
    for channel, series in summaries.items():
        for r in series:
            for k, name in enumerate(names):
                s = None if r.first_order is None else r.first_order[k]
                st = None if r.total is None else r.total[k]
                rows.append([_fmt(r.time), channel, name, _fmt(s), _fmt(st), _fmt(r.degenerate)])
    return _write(SOBOL_HEADER, rows)


def pdf_csv(est: DensityEstimate) -> str:
    return _write(PDF_HEADER, [[_fmt(x), _fmt(d)] for x, d in zip(est.grid, est.density)])
