"""
Percentile shares, share densities and Gini coefficients.

Units are ranked (by their own outcome or by an alternative variable), tied
units are pooled into blocks whose outcome mass is spread uniformly over the
block's rank interval, and group shares are read off the resulting
piecewise-linear Lorenz curve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

DEFAULT_CUTS = (50.0, 90.0)


class DegenerateDistributionError(ValueError):
    """Raised when shares are requested for a distribution with zero total."""


class DegenerateDistributionWarning(UserWarning):
    """Emitted when a Gini coefficient is reported for an all-zero vector."""


def _fmt_pct(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class CutSpec:
    """Strictly increasing cut points in percent, exclusive of 0 and 100."""

    cuts: tuple[float, ...] = DEFAULT_CUTS

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        if not cuts:
            raise ValueError("at least one cut point is required")
        for c in cuts:
            if not (0.0 < c < 100.0) or math.isnan(c):
                raise ValueError(f"cut {c!r} outside (0, 100)")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"cuts must be strictly increasing: {cuts}")
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def parse(cls, text: str) -> CutSpec:
        return cls(tuple(float(t) for t in text.split(",") if t.strip()))

    @property
    def edges(self) -> tuple[float, ...]:
        return (0.0, *self.cuts, 100.0)

    @property
    def widths(self) -> tuple[float, ...]:
        e = self.edges
        return tuple(b - a for a, b in zip(e, e[1:]))

    @property
    def labels(self) -> tuple[str, ...]:
        e = self.edges
        k = len(e) - 1
        out = []
        for i in range(k):
            if i == 0:
                out.append("bottom" + _fmt_pct(e[1]))
            elif i == k - 1:
                out.append("top" + _fmt_pct(100.0 - e[i]))
            elif k == 3:
                out.append("mid" + _fmt_pct(e[i + 1] - e[i]))
            else:
                out.append(f"p{_fmt_pct(e[i])}-{_fmt_pct(e[i + 1])}")
        return tuple(out)

    def __str__(self):
        return ",".join(_fmt_pct(c) for c in self.cuts)


@dataclass(frozen=True)
class ShareBreakdown:
    labels: tuple[str, ...]
    widths: tuple[float, ...]
    shares: tuple[float, ...]
    n_units: int
    total_outcome: float
    gini: float
    densities: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "densities", tuple(s / w for s, w in zip(self.shares, self.widths))
        )

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "widths": list(self.widths),
            "shares": list(self.shares),
            "n_units": self.n_units,
            "total_outcome": self.total_outcome,
            "gini": self.gini,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ShareBreakdown:
        return cls(
            labels=tuple(d["labels"]),
            widths=tuple(float(x) for x in d["widths"]),
            shares=tuple(float(x) for x in d["shares"]),
            n_units=int(d["n_units"]),
            total_outcome=float(d["total_outcome"]),
            gini=float(d["gini"]),
        )


@dataclass(frozen=True)
class RankedMass:
    """Outcome mass pooled into tie blocks, ordered by rank.

    ``bounds[j]`` and ``bounds[j + 1]`` delimit block ``j`` in unit counts
    (divide by ``n`` for rank fractions).
    """

    bounds: np.ndarray
    masses: np.ndarray
    total: float

    @property
    def n(self) -> int:
        return int(self.bounds[-1])

    def lorenz_at(self, p: float) -> float:
        """Unnormalized cumulative mass of the lowest-ranked fraction ``p``."""
        if p <= 0.0:
            return 0.0
        if p >= 1.0:
            return self.total
        t = p * self.n
        j = int(np.searchsorted(self.bounds, t, side="right")) - 1
        j = min(j, len(self.masses) - 1)
        lo, hi = self.bounds[j], self.bounds[j + 1]
        before = math.fsum(self.masses[:j].tolist())
        return before + self.masses[j] * (t - lo) / (hi - lo)


def _as_outcomes(outcomes: ArrayLike) -> np.ndarray:
    y = np.asarray(outcomes, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("outcomes must be non-empty")
    if not np.all(np.isfinite(y)):
        raise ValueError("outcomes must be finite")
    if np.any(y < 0):
        raise ValueError("outcomes must be non-negative")
    return y


def ranked_mass(outcomes: ArrayLike, ranking: ArrayLike | None = None) -> RankedMass:
    """Pool units into tie blocks of the ranking variable (default: the outcome)."""
    y = _as_outcomes(outcomes)
    if ranking is None:
        r = y
    else:
        r = np.asarray(ranking, dtype=np.float64).ravel()
        if r.shape != y.shape:
            raise ValueError(
                f"outcomes and ranking differ in length ({y.size} != {r.size})"
            )
        if np.any(np.isnan(r)):
            raise ValueError("ranking contains NaN")
    order = np.argsort(r, kind="stable")
    rs = r[order]
    ys = y[order]
    starts = np.flatnonzero(np.r_[True, rs[1:] != rs[:-1]])
    masses = np.add.reduceat(ys, starts)
    bounds = np.r_[starts, y.size].astype(np.float64)
    total = math.fsum(y.tolist())
    return RankedMass(bounds=bounds, masses=masses, total=total)


def lorenz_curve(
    outcomes: ArrayLike, ranking: ArrayLike | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Knots ``(p, L)`` of the normalized, piecewise-linear Lorenz curve.

    With ``ranking`` given this is the concentration curve of ``outcomes``
    ordered by ``ranking``.
    """
    rm = ranked_mass(outcomes, ranking)
    if rm.total <= 0:
        raise DegenerateDistributionError("total outcome is zero; Lorenz curve undefined")
    p = rm.bounds / rm.n
    cum = np.r_[0.0, np.cumsum(rm.masses)]
    cum[-1] = rm.total
    return p, cum / rm.total


def _breakdown(rm: RankedMass, cuts: CutSpec, gini_value: float) -> ShareBreakdown:
    if rm.total <= 0:
        raise DegenerateDistributionError("degenerate distribution: total outcome is zero")
    levels = [0.0] + [rm.lorenz_at(c / 100.0) for c in cuts.cuts] + [rm.total]
    shares = tuple(100.0 * (b - a) / rm.total for a, b in zip(levels, levels[1:]))
    return ShareBreakdown(
        labels=cuts.labels,
        widths=cuts.widths,
        shares=shares,
        n_units=rm.n,
        total_outcome=rm.total,
        gini=gini_value,
    )


def percentile_shares(outcomes: ArrayLike, cuts: CutSpec | None = None) -> ShareBreakdown:
    """Shares of total outcome held by rank groups, units ranked by outcome.

    Examples
    --------
    >>> percentile_shares([1, 1, 1, 7]).shares
    (20.0, 52.0, 28.0)
    """
    cuts = cuts or CutSpec()
    rm = ranked_mass(outcomes)
    return _breakdown(rm, cuts, _gini_sorted(np.sort(_as_outcomes(outcomes)), rm.total))


def percentile_shares_by(
    outcomes: ArrayLike, ranking: ArrayLike, cuts: CutSpec | None = None
) -> ShareBreakdown:
    """Shares of total outcome held by groups ranked by an alternative variable.

    The attached Gini is that of ``outcomes`` itself, not of the ranking.
    """
    cuts = cuts or CutSpec()
    rm = ranked_mass(outcomes, ranking)
    return _breakdown(rm, cuts, _gini_sorted(np.sort(_as_outcomes(outcomes)), rm.total))


def _gini_sorted(ys: np.ndarray, total: float) -> float:
    n = ys.size
    if total <= 0:
        return 0.0
    weights = 2.0 * np.arange(1, n + 1, dtype=np.float64) - n - 1
    num = math.fsum((weights * ys).tolist())
    return max(num / (n * total), 0.0)


def gini(outcomes: ArrayLike) -> float:
    """Gini coefficient, mean absolute pairwise difference over twice the mean.

    No small-sample correction is applied, so a single holder among ``n``
    units gives ``(n - 1) / n``.  An all-zero vector yields 0.0 together with
    a :class:`DegenerateDistributionWarning`.
    """
    y = _as_outcomes(outcomes)
    total = math.fsum(y.tolist())
    if total <= 0:
        warnings.warn(
            "Gini coefficient of an all-zero vector reported as 0",
            DegenerateDistributionWarning,
            stacklevel=2,
        )
        return 0.0
    return _gini_sorted(np.sort(y), total)


def share_density(breakdown: ShareBreakdown) -> list[float]:
    return [s / w for s, w in zip(breakdown.shares, breakdown.widths)]


def densities(shares: Sequence[float], widths: Sequence[float]) -> list[float]:
    return [s / w for s, w in zip(shares, widths)]
