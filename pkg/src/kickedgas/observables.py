"""Measured quantities: per-trajectory records and mergeable ensemble statistics.

Ensemble accumulation is Welford-style (count, mean, M2 per time sample) so a
partition of realizations merged in canonical index order reproduces the
single-pass result to rounding.  The dispersion fluctuation sd(sigma) uses the
population normalization sqrt(E[X^2] - E[X]^2) with X the per-realization
mean-square width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as _stats


class FitRefusedError(ValueError):
    """The requested fit window or sample set is unusable."""


# ---------------------------------------------------------------------------
# single-profile observables


def _profile(x, q=None):
    """Populations and matching momenta from a WaveState or a raw array."""
    if hasattr(x, "populations"):
        pops = x.populations()
        n = len(pops)
        qs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        return pops, qs
    pops = np.asarray(x, dtype=float)
    if q is None:
        n = len(pops)
        qs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    else:
        qs = np.asarray(q)
    return pops, qs


def sigma2(x, q=None) -> float:
    """Mean-square momentum width sum_q q^2 p_q of a normalized profile."""
    pops, qs = _profile(x, q)
    return float(np.sum(qs.astype(float) ** 2 * pops))


def condensate_fraction(x, q=None) -> float:
    """Population of the q = 0 mode."""
    pops, qs = _profile(x, q)
    idx = np.nonzero(qs == 0)[0]
    return float(pops[idx[0]])


def ipr(mean_fourth_total: float) -> float:
    """Inverse participation ratio 1/sum_q mean(|psi_q|^4).

    The fourth moments are ensemble-averaged before inverting.
    """
    if mean_fourth_total <= 0:
        raise ValueError("summed fourth moments must be positive")
    return 1.0 / float(mean_fourth_total)


def sd_sigma(mean_x: float, mean_x2: float) -> float:
    """Std of the per-realization dispersion from its first two moments."""
    var = mean_x2 - mean_x * mean_x
    return math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# amplitude statistics


@dataclass(frozen=True)
class HistogramResult:
    bin_edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    rho_bar: float          # fitted scale of P(rho) ~ exp(-rho/rho_bar)
    ks_stat: float
    ks_p: float

    @property
    def exponential_ok(self) -> bool:
        return self.ks_p > 0.01


def amplitude_histogram(samples, bins: int = 24) -> HistogramResult:
    """Normalized log-binned histogram of |psi_q|^2 samples plus an
    exponential-law fit (scale = sample mean) with a KS goodness statistic."""
    samples = np.asarray(samples, dtype=float)
    samples = samples[samples > 0]
    if samples.size < 2:
        raise FitRefusedError("need at least two positive samples")
    lo, hi = samples.min(), samples.max()
    if lo == hi:
        raise FitRefusedError("samples are degenerate; fewer than 2 nonempty bins")
    edges = np.geomspace(lo, hi, bins + 1)
    counts, edges = np.histogram(samples, bins=edges)
    if np.count_nonzero(counts) < 2:
        raise FitRefusedError("fewer than 2 nonempty bins")
    density = counts / (samples.size * np.diff(edges))
    rho_bar = float(samples.mean())
    ks = _stats.kstest(samples, "expon", args=(0.0, rho_bar))
    return HistogramResult(edges, density, counts, rho_bar,
                           float(ks.statistic), float(ks.pvalue))


# ---------------------------------------------------------------------------
# exponential wings


@dataclass(frozen=True)
class TailFit:
    xi: float
    residual: float      # worst per-wing rms of log-residuals
    wing_xi: Tuple[float, float]
    n_points: Tuple[int, int]

    #: rms log-residual above which the exponential model is considered wrong
    RESIDUAL_LIMIT = 0.5

    @property
    def ok(self) -> bool:
        return self.residual <= self.RESIDUAL_LIMIT


def tail_length(
    q,
    profile,
    lo_frac: float = 1e-12,
    hi_frac: float = 1e-4,
    min_points: int = 10,
) -> TailFit:
    """Exponential decay length xi of the far wings, p_q ~ exp(-|q|/xi).

    Fits log p against |q| on each wing over the window where populations lie
    in [lo_frac, hi_frac] of the peak, and averages the two wings.
    """
    q = np.asarray(q)
    p = np.asarray(profile, dtype=float)
    peak = p.max()
    if peak <= 0:
        raise FitRefusedError("profile has no positive peak")
    lo, hi = lo_frac * peak, hi_frac * peak
    wings = []
    for side in (q > 0, q < 0):
        aq = np.abs(q[side])
        ps = p[side]
        order = np.argsort(aq)
        aq, ps = aq[order], ps[order]
        sel = (ps >= lo) & (ps <= hi) & (aq > np.abs(q[np.argmax(p)]))
        aq, ps = aq[sel], ps[sel]
        if aq.size < min_points:
            raise FitRefusedError(
                f"wing window has {aq.size} points, need {min_points}"
            )
        if ps[0] <= ps[-1]:
            raise FitRefusedError("wing window is not decaying outward")
        x = aq.astype(float)
        y = np.log(ps)
        coef, res = np.polyfit(x, y, 1), None
        fit = np.polyval(coef, x)
        res = float(np.sqrt(np.mean((y - fit) ** 2)))
        slope = coef[0]
        if slope >= 0:
            raise FitRefusedError("wing slope is nonnegative")
        wings.append((-1.0 / slope, res, aq.size))
    xi = 0.5 * (wings[0][0] + wings[1][0])
    return TailFit(
        xi=float(xi),
        residual=float(max(wings[0][1], wings[1][1])),
        wing_xi=(float(wings[0][0]), float(wings[1][0])),
        n_points=(wings[0][2], wings[1][2]),
    )


# ---------------------------------------------------------------------------
# trajectory records and ensemble accumulation


@dataclass
class TrajectoryRecord:
    """Per-kick observable samples for one realization."""

    index: int
    times: np.ndarray
    scalars: Dict[str, np.ndarray]
    profiles: Dict[int, np.ndarray] = field(default_factory=dict)
    hist: Dict[Tuple[int, int], float] = field(default_factory=dict)
    aborted: bool = False
    aliased_at: Optional[int] = None


@dataclass
class EnsembleStats:
    """Mergeable Welford accumulators over realizations.

    `count` counts completed realizations only; aborted ones are excluded
    from every moment but tallied in `aborted`.
    """

    times: np.ndarray
    probes: Tuple[str, ...]
    count: int = 0
    aborted: int = 0
    mean: Dict[str, np.ndarray] = field(default_factory=dict)
    m2: Dict[str, np.ndarray] = field(default_factory=dict)
    profile_sum: Dict[int, np.ndarray] = field(default_factory=dict)
    hist_samples: Dict[Tuple[int, int], list] = field(default_factory=dict)

    @classmethod
    def empty(cls, times, probes, snapshot_times=(), hist_snapshots=(),
              n_s: Optional[int] = None) -> "EnsembleStats":
        times = np.asarray(times, dtype=np.int64)
        probes = tuple(probes)
        stats = cls(times=times, probes=probes)
        for p in probes:
            stats.mean[p] = np.zeros(len(times))
            stats.m2[p] = np.zeros(len(times))
        for t in snapshot_times:
            stats.profile_sum[int(t)] = np.zeros(n_s if n_s else 0)
        for (q, t) in hist_snapshots:
            stats.hist_samples[(int(q), int(t))] = []
        return stats

    def add_record(self, rec: TrajectoryRecord) -> None:
        if rec.aborted:
            self.aborted += 1
            return
        if len(rec.times) != len(self.times):
            raise ValueError("record time axis does not match accumulator")
        self.count += 1
        k = self.count
        for p in self.probes:
            x = rec.scalars[p]
            delta = x - self.mean[p]
            self.mean[p] += delta / k
            self.m2[p] += delta * (x - self.mean[p])
        for t, prof in rec.profiles.items():
            if t not in self.profile_sum or self.profile_sum[t].size == 0:
                self.profile_sum[t] = prof.astype(float).copy()
            else:
                self.profile_sum[t] += prof
        for key, v in rec.hist.items():
            self.hist_samples.setdefault(key, []).append(v)

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Pooled combination; merge partial results in realization order."""
        if not np.array_equal(self.times, other.times):
            raise ValueError("mismatched time axes")
        if self.probes != other.probes:
            raise ValueError("mismatched probes")
        if self.count == 0:
            out = other._clone()
            out.aborted += self.aborted
            return out
        if other.count == 0:
            out = self._clone()
            out.aborted += other.aborted
            return out
        out = EnsembleStats(times=self.times.copy(), probes=self.probes)
        na, nb = self.count, other.count
        out.count = na + nb
        out.aborted = self.aborted + other.aborted
        for p in self.probes:
            d = other.mean[p] - self.mean[p]
            out.mean[p] = self.mean[p] + d * (nb / out.count)
            out.m2[p] = self.m2[p] + other.m2[p] + d * d * (na * nb / out.count)
        keys = set(self.profile_sum) | set(other.profile_sum)
        for t in keys:
            a = self.profile_sum.get(t)
            b = other.profile_sum.get(t)
            if a is None:
                out.profile_sum[t] = b.copy()
            elif b is None:
                out.profile_sum[t] = a.copy()
            else:
                out.profile_sum[t] = a + b
        for key in set(self.hist_samples) | set(other.hist_samples):
            out.hist_samples[key] = list(self.hist_samples.get(key, [])) + list(
                other.hist_samples.get(key, [])
            )
        return out

    def _clone(self) -> "EnsembleStats":
        out = EnsembleStats(times=self.times.copy(), probes=self.probes)
        out.count = self.count
        out.aborted = self.aborted
        out.mean = {p: v.copy() for p, v in self.mean.items()}
        out.m2 = {p: v.copy() for p, v in self.m2.items()}
        out.profile_sum = {t: v.copy() for t, v in self.profile_sum.items()}
        out.hist_samples = {k: list(v) for k, v in self.hist_samples.items()}
        return out

    # ---- derived quantities ------------------------------------------------

    def scalar_mean(self, name: str) -> np.ndarray:
        return self.mean[name]

    def scalar_var(self, name: str) -> np.ndarray:
        """Population variance across realizations, per time."""
        if self.count < 2:
            raise ValueError("variance needs at least 2 realizations")
        return self.m2[name] / self.count

    def sd_sigma(self) -> np.ndarray:
        """sqrt(E[sigma2^2] - E[sigma2]^2) across realizations, per time."""
        return np.sqrt(np.maximum(self.scalar_var("sigma2"), 0.0))

    def ipr(self) -> np.ndarray:
        """1 / mean(sum_q |psi_q|^4), per time."""
        return 1.0 / self.mean["ipr_moment"]

    def mean_profile(self, t: int) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no completed realizations")
        return self.profile_sum[int(t)] / self.count

    def samples(self, q: int, t: int) -> np.ndarray:
        return np.asarray(self.hist_samples[(int(q), int(t))], dtype=float)


def merge(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
    """Pooled merge of two accumulators (see EnsembleStats.merge)."""
    return a.merge(b)
