"""Closed-form predictions and reduced models used as independent oracles.

Everything here is pure and reentrant: the 2x2 transfer-matrix description of
the first excited mode, growth rates and characteristic times, subdiffusive
scalings, the Gaussian central profile, a Langevin surrogate for incoherent
heating of a border mode, and the least-squares fitters that extract
exponents and rates from simulated series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate as _integrate

from .observables import FitRefusedError

PI = math.pi
LN10 = math.log(10.0)


# ---------------------------------------------------------------------------
# linearized one-mode dynamics


def transfer_matrix(phi1: float, gamma_star: float) -> np.ndarray:
    """One-period map of (Re, Im) of the first mode: shear times rotation."""
    shear = np.array([[1.0, 0.0], [-gamma_star / PI, 1.0]])
    c, s = math.cos(phi1), math.sin(phi1)
    rot = np.array([[c, -s], [s, c]])
    return shear @ rot


def growth_mu(phi1, gamma_star):
    """mu = cos(phi1) + (gamma*/2pi) sin(phi1); |eigenvalues| > 1 iff mu^2 > 1."""
    return np.cos(phi1) + gamma_star / (2.0 * PI) * np.sin(phi1)


def is_growing(phi1, gamma_star):
    """True where the transfer matrix has an expanding eigenvalue."""
    mu = growth_mu(phi1, gamma_star)
    return mu * mu > 1.0


def growth_probability(gamma_star: float) -> float:
    """Small-gamma* probability that a drawn phi_1 leads to growth."""
    return gamma_star / PI**2


def saddle_phase(gamma_star: float) -> float:
    """Phase of fastest growth within the growing interval."""
    return gamma_star / (2.0 * PI)


def orbit_norm2(phi1, gamma_star: float, lam: float, n: int) -> np.ndarray:
    """|U^n Gamma(0)|^2 for Gamma(0) = (exp(-lam^2), 0), vectorized in phi1."""
    phi1 = np.atleast_1d(np.asarray(phi1, dtype=float))
    x = np.full_like(phi1, math.exp(-(lam**2)))
    y = np.zeros_like(phi1)
    c, s = np.cos(phi1), np.sin(phi1)
    shear = gamma_star / PI
    for _ in range(n):
        xr = c * x - s * y
        yr = s * x + c * y
        x, y = xr, yr - shear * xr
    return x * x + y * y


def psi1_mc(gamma_star: float, lam: float, t: int, samples: int,
            seed: int = 0) -> float:
    """Monte-Carlo average of |U^t Gamma(0)|^2 over uniform phi_1."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    phi = rng.uniform(0.0, 2.0 * PI, samples)
    return float(orbit_norm2(phi, gamma_star, lam, t).mean())


def psi1_closed(t, gamma_star: float, lam: float):
    """Saddle-point population of the first mode,
    exp(-2 lam^2) [1 + (1/2pi) sqrt(gamma*/2t) exp(gamma* t/pi)]."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("closed form is singular at t = 0; use the quadrature")
    amp = math.exp(-2.0 * lam**2)
    return amp * (1.0 + np.sqrt(gamma_star / (2.0 * t))
                  * np.exp(gamma_star * t / PI) / (2.0 * PI))


def psi1_quadrature(t: int, gamma_star: float, lam: float) -> float:
    """Numerical phi_1 integral of the linearized growth (validation variant).

    Integrates (gamma*/pi^2) sinh^2(t sqrt(phi(gamma*/pi - phi)))/phi over the
    growing interval phi in (0, gamma*/pi); the integrand is finite at 0.
    """
    gp = gamma_star / PI
    amp = math.exp(-2.0 * lam**2)

    def integrand(v):
        # v = phi/gp in (0, 1); at v -> 0 the limit is t^2 * gp
        if v <= 0.0:
            return t * t * gp
        arg = t * gp * math.sqrt(v * (1.0 - v))
        return math.sinh(arg) ** 2 / v
    val, _err = _integrate.quad(integrand, 0.0, 1.0, limit=200)
    return amp * (1.0 + gamma_star / PI**2 * val)


def ehrenfest_time(gamma_star: float, lam: float) -> float:
    """t_E = 2 pi lam^2 / gamma*: spreading over the q = -1, 0, 1 subspace."""
    if gamma_star <= 0:
        raise ValueError("gamma_star must be positive")
    return 2.0 * PI * lam**2 / gamma_star

def mode_depletion_time(q: int, gamma_star: float, lam: float) -> float:
    """Generalized ladder t_q = q * t_E for the q-th mode."""
    return q * ehrenfest_time(gamma_star, lam)


# ---------------------------------------------------------------------------
# long-time laws


def guarneri_rate(gamma_star: float) -> float:
    """Per-kick exponent ln(1 + (gamma*/pi)^2) of the delta-kick growth."""
    return math.log1p((gamma_star / PI) ** 2)


def sigma2_delta_longtime(t, gamma_star: float,
                          anchor: Tuple[float, float] = (0.0, 1.0)):
    """Exponential long-time growth with the prefactor fixed by an anchor."""
    t = np.asarray(t, dtype=float)
    t0, y0 = anchor
    return y0 * np.exp(guarneri_rate(gamma_star) * (t - t0))


def subdiffusion_sigma2(t, gamma_star: float, f: float, coef: float = 1.0):
    """sigma^2(t) = coef * f^2 * gamma* * sqrt(t) beyond the Ehrenfest time."""
    t = np.asarray(t, dtype=float)
    return coef * f**2 * gamma_star * np.sqrt(t)


def calibrate_subdiffusion(times, sigma2s, gamma_star: float, f: float,
                           window: Tuple[float, float]) -> float:
    """One-shot calibration of the subdiffusion prefactor, reused across
    (f, gamma*) points afterwards."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(sigma2s, dtype=float)
    sel = (t >= window[0]) & (t <= window[1]) & (y > 0)
    if sel.sum() < 2:
        raise FitRefusedError("calibration window too short")
    return float(np.mean(y[sel] / (f**2 * gamma_star * np.sqrt(t[sel]))))


def tau_depletion(gamma_star: float, lam: float) -> float:
    """Condensate depletion time tau = 2 pi^3 lam^2 / gamma*^2."""
    return 2.0 * PI**3 * lam**2 / gamma_star**2


def delta_breakdown_time(gamma_star: float, lam: float, f: float) -> float:
    """t_f = tau * ln f: where the delta-kick description stops applying."""
    if f <= 0:
        raise ValueError("f must be positive")
    return tau_depletion(gamma_star, lam) * math.log(f)


def condensate_decay(t, gamma_star: float, lam: float):
    """Mean condensate fraction exp[-(t - t_E)/tau] for t >= t_E (delta kicks)."""
    t = np.asarray(t, dtype=float)
    te = ehrenfest_time(gamma_star, lam)
    tau = tau_depletion(gamma_star, lam)
    return np.exp(-(t - te) / tau)


def gaussian_profile(q, sigma2: float):
    """Zero-parameter central profile exp(-q^2/2 sigma^2)/sqrt(2 pi sigma^2)."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    q = np.asarray(q, dtype=float)
    return np.exp(-(q**2) / (2.0 * sigma2)) / math.sqrt(2.0 * PI * sigma2)


def roundoff_collapse_horizon(gamma_star: float, digits: int) -> float:
    """Kicks for the 10^(-2*digits) round-off population floor to reach O(1)
    growing at the linear rate gamma*/pi.  Observables dominated by rare
    compact realizations are unreliable past this time."""
    return 2.0 * digits * LN10 * PI / gamma_star


# ---------------------------------------------------------------------------
# Langevin surrogate for the incoherent heating of a border mode


def langevin_mean_square(
    gamma_star: float,
    f: float,
    rho: float,
    horizon: int,
    seed: int = 0,
    q: int = 1,
    steps_per_unit: int = 100,
    n_real: int = 2000,
) -> Tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama mean of |psi_q(s)|^2 for
    i d_s psi = q^2/(2 f^2) psi + (gamma*/2pi) f^2 rho^(3/2) eta(s),
    with complex white noise of unit spectral density.

    Returns (s at integer times, ensemble mean |psi|^2); the mean grows
    linearly with slope (gamma*/2pi)^2 f^4 rho^3.
    """
    if rho <= 0 or rho > 1:
        raise ValueError("rho must lie in (0, 1]")
    ds = 1.0 / steps_per_unit
    amp = gamma_star / (2.0 * PI) * f**2 * rho**1.5
    w = q * q / (2.0 * f**2) * ds
    rot = complex(math.cos(w), -math.sin(w))
    rng = np.random.Generator(np.random.Philox(key=seed))
    psi = np.zeros(n_real, dtype=np.complex128)
    out = np.zeros(horizon + 1)
    # increments have variance ds per step (ds/2 per quadrature), realizing
    # delta-correlated noise in the small-step limit
    sd = math.sqrt(ds / 2.0)
    for k in range(1, horizon + 1):
        for _ in range(steps_per_unit):
            eta = rng.normal(0.0, sd, n_real) + 1j * rng.normal(0.0, sd, n_real)
            psi = (psi - 1j * amp * eta) * rot
        out[k] = float(np.mean(psi.real**2 + psi.imag**2))
    return np.arange(horizon + 1, dtype=float), out


def langevin_slope_prediction(gamma_star: float, f: float, rho: float) -> float:
    """Closed-form heating rate (gamma*/2pi)^2 f^4 rho^3 of the surrogate."""
    return (gamma_star / (2.0 * PI)) ** 2 * f**4 * rho**3


# ---------------------------------------------------------------------------
# fitters


@dataclass(frozen=True)
class FitResult:
    kind: str                 # "power_law" | "exponential"
    value: float              # exponent or rate
    prefactor: float
    stderr: float
    residual: float           # rms residual in the fit coordinates
    window: Tuple[float, float]
    n_points: int


def _window_select(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    return t[sel], y[sel]


def _linfit(x, y, kind, window):
    n = x.size
    A = np.column_stack([x, np.ones(n)])
    coef, res_, rank_, sv_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    resid = y - fit
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return FitResult(
        kind=kind,
        value=float(coef[0]),
        prefactor=float(np.exp(coef[1])),
        stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        residual=rms,
        window=(float(window[0]), float(window[1])),
        n_points=int(n),
    )


def fit_power_law(t, y, window) -> FitResult:
    """Least squares on (log t, log y): value is the exponent of y ~ C t^a.

    Requires at least 8 positive points spanning half a decade in t.
    """
    ts, ys = _window_select(t, y, window)
    if ts.size < 8:
        raise FitRefusedError(f"power-law window has {ts.size} points, need 8")
    if np.any(ys <= 0) or np.any(ts <= 0):
        raise FitRefusedError("power-law fit needs positive data")
    if math.log10(ts.max() / ts.min()) < 0.5:
        raise FitRefusedError("power-law window spans less than half a decade")
    return _linfit(np.log(ts), np.log(ys), "power_law", window)


def fit_exponential(t, y, window) -> FitResult:
    """Least squares on (t, log y): value is the rate of y ~ C exp(rate*t)."""
    ts, ys = _window_select(t, y, window)
    if ts.size < 4:
        raise FitRefusedError(f"exponential window has {ts.size} points, need 4")
    if np.any(ys <= 0):
        raise FitRefusedError("exponential fit needs positive data")
    return _linfit(ts, np.log(ys), "exponential", window)


def extract_tau(
    times,
    condensate,
    gamma_star: float,
    lam: float,
    digits: int = 15,
    floor: float = 0.02,
    window: Optional[Tuple[float, float]] = None,
) -> FitResult:
    """Fit the exponential condensate decay and return it with value = rate.

    The default window starts past the Ehrenfest time and ends before the
    round-off collapse horizon for the given precision, restricted to mean
    fractions above `floor` (grid-saturation background).  tau = -1/rate.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(condensate, dtype=float)
    te = ehrenfest_time(gamma_star, lam)
    if window is None:
        t_hi = 0.85 * roundoff_collapse_horizon(gamma_star, digits)
        window = (1.15 * te, t_hi)
    sel = (t >= window[0]) & (t <= window[1]) & (c >= floor)
    if sel.sum() < 4:
        raise FitRefusedError("usable decay window is too short")
    return fit_exponential(t[sel], c[sel], (float(t[sel].min()), float(t[sel].max())))
