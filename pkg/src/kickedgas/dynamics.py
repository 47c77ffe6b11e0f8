"""Wave state, random phases, and one-period propagators.

One driving period consists of free evolution, where every momentum mode q
picks up a quenched random phase exp(-i*phi_q), followed by an interaction
kick.  The kick is either the exact pointwise map for delta pulses,

    psi(x) <- exp(-i*gamma_star*|psi(x)|^2) * psi(x),

or, for pulses of finite duration, one unit of the rescaled equation

    i d_s psi = [q^2/(2 f^2) + gamma_star*|psi|^2] psi

integrated by second-order (Strang) splitting with inner step delta_s.
Position density uses the 2*pi-ring convention: |psi(x)|^2 integrates to one
over [0, 2*pi), i.e. density = (N_s/2*pi) * |u_j|^2 on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels
from .observables import TrajectoryRecord
from .precision import GridSizeError, PrecisionError, ScalarContext

TWO_PI = 2.0 * math.pi

#: populations above this, within EDGE_GUARD_POINTS of the grid edge,
#: flag a trajectory as aliased
EDGE_THRESHOLD = 1e-8
EDGE_GUARD_POINTS = 4

DEFAULT_PROBES = ("sigma2", "condensate", "ipr_moment")


class ConfigError(ValueError):
    """Invalid physics or numerics configuration."""


class AliasingError(RuntimeError):
    """Occupied momenta reached the grid edge under the abort policy."""


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionful parameters of the driven ring: hbar, mass, circumference,
    drive period, kick width, interaction parameter and atom number."""

    hbar: float
    mass: float
    length: float
    period: float
    kick_width: float
    g: float
    n_atoms: int

    def __post_init__(self):
        for name in ("hbar", "mass", "length", "period", "kick_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be a positive integer")
        if self.kick_width > self.period:
            raise ConfigError("kick width cannot exceed the period")


class DerivedParams(NamedTuple):
    hbar_eff: float
    gamma_star: float
    f: float


def derive_dimensionless(p: PhysicalParams) -> DerivedParams:
    """Effective Planck constant and the two kick parameters.

    hbar_eff = hbar*T*(2*pi/L)^2/m, gamma_star = 2*pi*g*N*dt/(L*hbar),
    f = (L/2*pi)*sqrt(m/(dt*hbar)).  The delta-kick limit (dt -> 0 at fixed
    gamma_star) must be requested explicitly through kick="delta".
    """
    if p.kick_width == 0:
        raise ConfigError(
            "kick_width = 0 is the delta-kick limit; request it explicitly "
            "via the gamma*delta_t product (kick='delta')"
        )
    hbar_eff = p.hbar * p.period * (TWO_PI / p.length) ** 2 / p.mass
    gamma_star = TWO_PI * p.g * p.n_atoms * p.kick_width / (p.length * p.hbar)
    f = (p.length / TWO_PI) * math.sqrt(p.mass / (p.kick_width * p.hbar))
    return DerivedParams(hbar_eff, gamma_star, f)


@dataclass(frozen=True)
class SimConfig:
    """All physics and numerics knobs for one ensemble."""

    gamma_star: float
    lam: float
    n_s: int
    horizon: int
    n_r: int
    seed: int
    kick: str = "delta"  # "delta" | "finite"
    f: Optional[float] = None
    delta_s: float = 1.0 / 500.0
    scalar: ScalarContext = field(default_factory=ScalarContext.double)
    edge_policy: str = "abort"  # "abort" | "saturate"
    batch_size: int = 64  # fixed batching keeps reductions scheduler-independent

    def __post_init__(self):
        if self.gamma_star < 0:
            raise ConfigError("gamma_star must be nonnegative")
        if self.lam <= 0:
            raise ConfigError("lambda must be strictly positive")
        if self.n_s < 8 or (self.n_s & (self.n_s - 1)) != 0:
            raise ConfigError("n_s must be a power of two >= 8")
        if self.kick not in ("delta", "finite"):
            raise ConfigError("kick must be 'delta' or 'finite'")
        if self.kick == "finite":
            if self.f is None or self.f <= 0:
                raise ConfigError("finite kicks need f > 0")
            inv = 1.0 / self.delta_s
            if not 0 < self.delta_s < 1 or abs(inv - round(inv)) > 1e-9:
                raise ConfigError("1/delta_s must be a positive integer")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.n_r < 1:
            raise ConfigError("n_r must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if self.edge_policy not in ("abort", "saturate"):
            raise ConfigError("edge_policy must be 'abort' or 'saturate'")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")

    @property
    def steps_per_kick(self) -> int:
        return int(round(1.0 / self.delta_s))


def q_values(n_s: int) -> np.ndarray:
    """Integer momenta in FFT layout: [0, 1, ..., n/2-1, -n/2, ..., -1]."""
    return np.fft.fftfreq(n_s, d=1.0 / n_s).astype(np.int64)


def q_centered(n_s: int) -> np.ndarray:
    """Integer momenta sorted ascending, [-n/2, n/2)."""
    return np.arange(-(n_s // 2), n_s // 2, dtype=np.int64)


# ---------------------------------------------------------------------------
# state


class WaveState:
    """Spectral amplitudes psi_q in FFT layout plus the kick counter."""

    __slots__ = ("amplitudes", "time", "ctx")

    def __init__(self, amplitudes, ctx: ScalarContext, time: int = 0):
        self.amplitudes = amplitudes
        self.ctx = ctx
        self.time = time

    @property
    def n(self) -> int:
        return len(self.amplitudes)

    def populations(self) -> np.ndarray:
        """|psi_q|^2 as float64, FFT layout."""
        return self.ctx.populations(self.amplitudes)

    def norm2(self):
        return self.ctx.norm2(self.amplitudes)

    def copy(self) -> "WaveState":
        if self.ctx.is_double:
            amps = self.amplitudes.copy()
        else:
            amps = np.array(self.amplitudes, dtype=object)
        return WaveState(amps, self.ctx, self.time)


def init_state(lam: float, n_s: int, ctx: Optional[ScalarContext] = None) -> WaveState:
    """Normalized Gaussian condensate psi_q = C*exp(-lam^2 q^2) at t = 0."""
    if lam <= 0:
        raise ConfigError("lambda must be strictly positive")
    ctx = ctx or ScalarContext.double()
    q = q_values(n_s)
    if ctx.is_double:
        amps = np.exp(-(lam**2) * q.astype(float) ** 2).astype(np.complex128)
        if amps[1] == 0.0 and n_s > 2 and lam < math.inf:
            raise PrecisionError(
                "exp(-lambda^2) underflows at double precision; "
                "use an arbitrary-precision context with more digits"
            )
        amps /= math.sqrt(float(np.sum(amps.real**2)))
        return WaveState(amps, ctx)
    ctx.activate()
    import gmpy2

    lam2 = gmpy2.mpfr(lam) ** 2
    vals = np.empty(n_s, dtype=object)
    norm = gmpy2.mpfr(0)
    for i, qi in enumerate(q):
        a = gmpy2.exp(-lam2 * (int(qi) ** 2))
        vals[i] = gmpy2.mpc(a, 0)
        norm += a * a
    inv = 1 / gmpy2.sqrt(norm)
    return WaveState(vals * inv, ctx)


# ---------------------------------------------------------------------------
# quenched phases


@dataclass(frozen=True)
class PhaseConstraint:
    """First `count` phases restricted to the non-growing interval I."""

    count: int
    lower: float
    upper: float

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("constraint count must be nonnegative")
        if not self.lower < self.upper:
            raise ConfigError(
                f"constraint interval [{self.lower:.4g}, {self.upper:.4g}] is empty"
            )

    @classmethod
    def modes_below(cls, q: int, gamma_star: float) -> "PhaseConstraint":
        """Constrain phi_1..phi_{q-1} to I = [gamma_star/pi, pi]."""
        if q < 1:
            raise ConfigError("q must be at least 1")
        return cls(q - 1, gamma_star / math.pi, math.pi)


@dataclass(frozen=True)
class PhaseVector:
    """Quenched free-evolution phases phi_q for q = 0..q_max (phi_0 = 0)."""

    phases: np.ndarray

    @property
    def q_max(self) -> int:
        return len(self.phases) - 1

    def layout(self, n_s: int) -> np.ndarray:
        """Angles in FFT layout using the phi_{-q} = phi_q symmetry."""
        if self.q_max < n_s // 2:
            raise ConfigError(
                f"phase vector covers q <= {self.q_max}, grid needs {n_s // 2}"
            )
        return self.phases[np.abs(q_values(n_s))]


def draw_phases(
    seed: int,
    realization_index: int,
    q_max: int,
    constraint: Optional[PhaseConstraint] = None,
) -> PhaseVector:
    """Counter-based draw: phases depend only on (seed, realization_index).

    Unconstrained phi_q are i.i.d. uniform on [0, 2*pi); the first
    constraint.count indices are uniform on [lower, upper).
    """
    if q_max < 1:
        raise ConfigError("q_max must be at least 1")
    key = ((int(realization_index) + 1) << 64) | (int(seed) & (2**64 - 1))
    rng = np.random.Generator(np.random.Philox(key=key))
    u = rng.random(q_max)
    phases = np.empty(q_max + 1)
    phases[0] = 0.0
    phases[1:] = TWO_PI * u
    if constraint is not None and constraint.count > 0:
        k = min(constraint.count, q_max)
        width = constraint.upper - constraint.lower
        phases[1 : k + 1] = constraint.lower + width * u[:k]
    return PhaseVector(phases)


# ---------------------------------------------------------------------------
# propagation


class Propagator:
    """Cached per-config tables and the one-period evolution kernels.

    Hardware-mode methods accept either a single amplitude vector or a 2D
    batch (realizations along axis 0); arbitrary-precision methods are 1D.
    """

    def __init__(self, config: SimConfig, gamma_star: Optional[float] = None,
                 kinetic_sign: float = 1.0):
        self.config = config
        self.ctx = config.scalar
        self.ctx.activate()
        self.n = config.n_s
        g = config.gamma_star if gamma_star is None else gamma_star
        self.gamma_star = g
        q2 = q_values(self.n).astype(float) ** 2
        two_pi = self.ctx.two_pi()
        # density conversion |u_j|^2 -> |psi(x_j)|^2 on the 2*pi ring
        dens = self.n / two_pi
        if config.kick == "delta":
            self.nl_coef = self.ctx.real(g) * dens
            self.kin_half = None
            self.kin_full = None
        else:
            ds = self.ctx.real(1) / config.steps_per_kick
            self.nl_coef = self.ctx.real(g) * dens * ds
            half = kinetic_sign * q2 / (4.0 * config.f**2) / config.steps_per_kick
            self.kin_half = self.ctx.phase_factors(half)
            self.kin_full = self.kin_half * self.kin_half

    def free(self, amplitudes, phase_factors):
        """Diagonal free evolution exp(-i*phi_q); returns a fresh array."""
        return amplitudes * phase_factors

    def kick(self, amplitudes):
        """One interaction kick.  Consumes its argument (may mutate it)."""
        if self.config.kick == "delta":
            return self._kick_delta(amplitudes)
        return self._kick_finite(amplitudes)

    def _kick_delta(self, a):
        u = self.ctx.ifft(a, overwrite=True)
        u = self.ctx.nonlinear_phase(u, self.nl_coef)
        return self.ctx.fft(u, overwrite=True)

    def _kick_finite(self, a):
        steps = self.config.steps_per_kick
        if self.ctx.is_double:
            _kernels.rowmul_inplace(a, self.kin_half)
            for m in range(steps):
                u = self.ctx.ifft(a, overwrite=True)
                self.ctx.nonlinear_phase(u, self.nl_coef)
                a = self.ctx.fft(u, overwrite=True)
                _kernels.rowmul_inplace(
                    a, self.kin_full if m < steps - 1 else self.kin_half)
            return a
        a = a * self.kin_half
        for m in range(steps):
            u = self.ctx.ifft(a)
            u = self.ctx.nonlinear_phase(u, self.nl_coef)
            a = self.ctx.fft(u)
            a = a * (self.kin_full if m < steps - 1 else self.kin_half)
        return a


def free_propagate(state: WaveState, phases: PhaseVector) -> WaveState:
    """Multiply psi_q by exp(-i*phi_q); populations and time unchanged."""
    factors = state.ctx.phase_factors(phases.layout(state.n))
    return WaveState(state.amplitudes * factors, state.ctx, state.time)


def kick_delta(state: WaveState, gamma_star: float) -> WaveState:
    """Exact delta-kick map; advances the kick counter."""
    cfg = _single_kick_config(state, gamma_star, "delta", None, None)
    prop = Propagator(cfg)
    return WaveState(prop.kick(state.copy().amplitudes), state.ctx,
                     state.time + 1)


def kick_finite(
    state: WaveState,
    gamma_star: float,
    f: float,
    delta_s: float,
    kinetic_sign: float = 1.0,
) -> WaveState:
    """One finite-duration kick by Strang splitting; advances the counter."""
    cfg = _single_kick_config(state, abs(gamma_star), "finite", f, delta_s)
    prop = Propagator(cfg, gamma_star=gamma_star, kinetic_sign=kinetic_sign)
    return WaveState(prop.kick(state.copy().amplitudes), state.ctx,
                     state.time + 1)


def _single_kick_config(state, gamma_star, kick, f, delta_s):
    return SimConfig(
        gamma_star=gamma_star,
        lam=1.0,
        n_s=state.n,
        horizon=1,
        n_r=1,
        seed=0,
        kick=kick,
        f=f,
        delta_s=delta_s if delta_s is not None else 1.0 / 500.0,
        scalar=state.ctx,
    )


# ---------------------------------------------------------------------------
# trajectories


def _edge_band(populations: np.ndarray) -> np.ndarray:
    """Max population within EDGE_GUARD_POINTS of the grid edge, per row."""
    n = populations.shape[-1]
    lo = n // 2 - EDGE_GUARD_POINTS
    hi = n // 2 + EDGE_GUARD_POINTS
    return populations[..., lo:hi].max(axis=-1)


def run_batch(
    config: SimConfig,
    indices: Sequence[int],
    constraint: Optional[PhaseConstraint] = None,
    probes: Sequence[str] = DEFAULT_PROBES,
    snapshot_times: Sequence[int] = (),
    hist_snapshots: Sequence[tuple] = (),
) -> list:
    """Evolve the given realizations and return one TrajectoryRecord each.

    Hardware-mode batches evolve as a single 2D array so the FFTs amortize;
    the grouping is fixed by the caller, not by worker scheduling, keeping
    results bit-identical for any parallel layout.
    """
    probes = tuple(probes)
    for p in probes:
        if p not in DEFAULT_PROBES:
            raise ConfigError(f"unknown probe {p!r}")
    ctx = config.scalar
    ctx.activate()
    n = config.n_s
    b = len(indices)
    q2 = q_values(n).astype(float) ** 2
    snap_set = frozenset(int(t) for t in snapshot_times)
    hist_list = [(int(q), int(t)) for (q, t) in hist_snapshots]
    times = np.arange(config.horizon + 1, dtype=np.int64)

    base = init_state(config.lam, n, ctx)
    if ctx.is_double and b > 1:
        amps = np.tile(base.amplitudes, (b, 1))
    elif ctx.is_double:
        amps = base.amplitudes[np.newaxis, :].copy()
    else:
        amps = [base.copy().amplitudes for _ in range(b)]

    phase_rows = np.stack(
        [
            draw_phases(config.seed, i, n // 2, constraint).layout(n)
            for i in indices
        ]
    )
    if ctx.is_double:
        factors = np.exp(-1j * phase_rows)
    else:
        factors = [ctx.phase_factors(row) for row in phase_rows]

    prop = Propagator(config)
    scalars = {p: np.zeros((b, config.horizon + 1)) for p in probes}
    profiles = [dict() for _ in range(b)]
    hists = [dict() for _ in range(b)]
    aliased_at = [None] * b

    def record(t: int, pops: np.ndarray):
        if "sigma2" in scalars:
            scalars["sigma2"][:, t] = pops @ q2
        if "condensate" in scalars:
            scalars["condensate"][:, t] = pops[:, 0]
        if "ipr_moment" in scalars:
            scalars["ipr_moment"][:, t] = (pops * pops).sum(axis=1)
        if t in snap_set:
            for r in range(b):
                profiles[r][t] = np.fft.fftshift(pops[r]).copy()
        for (hq, ht) in hist_list:
            if ht == t:
                for r in range(b):
                    hists[r][(hq, ht)] = float(pops[r, hq % n])

    def all_pops():
        if ctx.is_double:
            return amps.real**2 + amps.imag**2
        return np.stack([ctx.populations(a) for a in amps])

    record(0, all_pops())
    for t in range(1, config.horizon + 1):
        if ctx.is_double:
            amps = prop.kick(prop.free(amps, factors))
        else:
            amps = [prop.kick(prop.free(a, f_)) for a, f_ in zip(amps, factors)]
        pops = all_pops()
        record(t, pops)
        band = _edge_band(pops)
        for r in range(b):
            if aliased_at[r] is None and band[r] > EDGE_THRESHOLD:
                aliased_at[r] = t

    records = []
    for r, idx in enumerate(indices):
        aborted = aliased_at[r] is not None and config.edge_policy == "abort"
        records.append(
            TrajectoryRecord(
                index=int(idx),
                times=times,
                scalars={p: scalars[p][r] for p in probes},
                profiles=profiles[r],
                hist=hists[r],
                aborted=aborted,
                aliased_at=aliased_at[r],
            )
        )
    return records


def run_trajectory(
    config: SimConfig,
    phases: Optional[PhaseVector] = None,
    probes: Sequence[str] = DEFAULT_PROBES,
    snapshot_times: Sequence[int] = (),
    hist_snapshots: Sequence[tuple] = (),
    realization_index: int = 0,
) -> TrajectoryRecord:
    """Evolve one realization for `horizon` periods, sampling after each kick.

    With the default abort policy an aliased trajectory raises AliasingError;
    under edge_policy="saturate" it is only flagged (aliased_at) and evolution
    continues on the wrapped grid.
    """
    if phases is not None:
        if phases.q_max < config.n_s // 2:
            raise ConfigError("phase vector does not cover the grid")
        rec = _run_with_phases(
            config, phases, probes, snapshot_times, hist_snapshots,
            realization_index,
        )
    else:
        rec = run_batch(
            config, [realization_index], None, probes, snapshot_times,
            hist_snapshots,
        )[0]
    if rec.aborted:
        raise AliasingError(
            f"occupied momenta reached the grid edge at kick {rec.aliased_at}; "
            "increase n_s or use edge_policy='saturate'"
        )
    return rec


def _run_with_phases(config, phases, probes, snapshot_times, hist_snapshots,
                     realization_index):
    """Single-trajectory path for explicitly supplied phase vectors."""
    ctx = config.scalar
    ctx.activate()
    n = config.n_s
    q2 = q_values(n).astype(float) ** 2
    snap_set = frozenset(int(t) for t in snapshot_times)
    hist_list = [(int(q), int(t)) for (q, t) in hist_snapshots]
    state = init_state(config.lam, n, ctx)
    if ctx.is_double:
        factors = np.exp(-1j * phases.layout(n))
    else:
        factors = ctx.phase_factors(phases.layout(n))
    prop = Propagator(config)
    times = np.arange(config.horizon + 1, dtype=np.int64)
    scalars = {p: np.zeros(config.horizon + 1) for p in tuple(probes)}
    profiles, hist = {}, {}
    aliased_at = None
    a = state.amplitudes

    def record(t, pops):
        if "sigma2" in scalars:
            scalars["sigma2"][t] = pops @ q2
        if "condensate" in scalars:
            scalars["condensate"][t] = pops[0]
        if "ipr_moment" in scalars:
            scalars["ipr_moment"][t] = float((pops * pops).sum())
        if t in snap_set:
            profiles[t] = np.fft.fftshift(pops).copy()
        for (hq, ht) in hist_list:
            if ht == t:
                hist[(hq, ht)] = float(pops[hq % n])

    record(0, ctx.populations(a))
    for t in range(1, config.horizon + 1):
        a = prop.kick(prop.free(a, factors))
        pops = ctx.populations(a)
        record(t, pops)
        if aliased_at is None and _edge_band(pops) > EDGE_THRESHOLD:
            aliased_at = t
    return TrajectoryRecord(
        index=realization_index,
        times=times,
        scalars=scalars,
        profiles=profiles,
        hist=hist,
        aborted=aliased_at is not None and config.edge_policy == "abort",
        aliased_at=aliased_at,
    )
