import math

import numpy as np
import pytest

from kickedgas import predictions as pred
from kickedgas.observables import FitRefusedError

PI = math.pi


# ---------------------------------------------------------------------------
# transfer matrix


def test_transfer_matrix_zero_phase():
    u = pred.transfer_matrix(0.0, 0.7)
    assert np.allclose(u, [[1, 0], [-0.7 / PI, 1]])


def test_transfer_matrix_reference_point():
    u = pred.transfer_matrix(PI / 2, PI)
    assert np.allclose(u, [[0, -1], [1, 1]], atol=1e-12)


def test_transfer_matrix_unit_determinant():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        phi = rng.uniform(0, 2 * PI)
        g = rng.uniform(0, 3.0)
        det = np.linalg.det(pred.transfer_matrix(phi, g))
        assert abs(det - 1.0) <= 100 * np.finfo(float).eps


def test_growth_classifier_boundary_and_saddle():
    # phi_1 = pi stays unimodular for small couplings
    assert not pred.is_growing(PI, 0.1)
    # the saddle phase grows and has (nearly) the largest rate in the interval
    g = 0.7
    phis = np.linspace(1e-4, g / PI - 1e-4, 2001)
    mus = pred.growth_mu(phis, g)
    saddle_mu = pred.growth_mu(pred.saddle_phase(g), g)
    assert pred.is_growing(pred.saddle_phase(g), g)
    assert saddle_mu >= mus.max() - 1e-9


def test_growth_measure_matches_probability():
    g = 0.7
    phi = np.linspace(0, 2 * PI, 2_000_001)
    frac = float(np.mean(pred.is_growing(phi, g)))
    assert frac == pytest.approx(pred.growth_probability(g), rel=0.05)
    assert pred.growth_probability(g) == pytest.approx(0.0709, abs=2e-4)


def test_classifier_consistent_with_iteration():
    g, lam = 0.7, 1.0
    rng = np.random.default_rng(12)
    grown = rng.uniform(0.15, 0.85, 50) * (g / PI)  # inside, away from edges
    norms = pred.orbit_norm2(grown, g, lam, 200)
    assert (np.sqrt(norms) >= 10 * math.exp(-(lam**2))).all()
    # unimodular phases stay bounded
    tame = rng.uniform(g / PI + 0.3, PI, 50)
    norms_tame = pred.orbit_norm2(tame, g, lam, 200)
    assert (np.sqrt(norms_tame) <= 10 * math.exp(-(lam**2))).all()


def test_mc_average_matches_quadrature():
    g, lam, t = 0.7, 3.03, 40
    mc = pred.psi1_mc(g, lam, t, samples=100_000, seed=4)
    quad = pred.psi1_quadrature(t, g, lam)
    assert mc == pytest.approx(quad, rel=0.05)


def test_psi1_closed_vs_quadrature():
    g, lam = 0.7, 3.03
    closed = float(pred.psi1_closed(40, g, lam))
    quad = pred.psi1_quadrature(40, g, lam)
    assert closed == pytest.approx(quad, rel=0.15)


def test_psi1_small_t_recovers_initial_population():
    g, lam = 0.05, 3.03
    val = float(pred.psi1_closed(1, g, lam))
    assert val == pytest.approx(math.exp(-2 * lam**2), rel=0.05)
    with pytest.raises(ValueError):
        pred.psi1_closed(0, g, lam)
    # quadrature variant is regular at t = 0
    assert pred.psi1_quadrature(0, g, lam) == pytest.approx(
        math.exp(-2 * lam**2), rel=1e-6)


# ---------------------------------------------------------------------------
# characteristic times and rates


def test_ehrenfest_time_values():
    assert pred.ehrenfest_time(0.7, 3.03) == pytest.approx(82.4, abs=0.1)
    assert pred.mode_depletion_time(2, 0.7, 3.03) == pytest.approx(
        2 * pred.ehrenfest_time(0.7, 3.03))
    assert pred.ehrenfest_time(0.7, 2 * 3.03) == pytest.approx(
        4 * pred.ehrenfest_time(0.7, 3.03))


def test_tau_values():
    assert pred.tau_depletion(1.0, 3.03) == pytest.approx(569, abs=1)
    assert pred.tau_depletion(4.0, 3.03) == pytest.approx(35.6, abs=0.1)
    assert pred.delta_breakdown_time(4.0, 3.03, 1.0) == 0.0


def test_guarneri_rate():
    assert pred.guarneri_rate(0.7) == pytest.approx(0.0484, abs=5e-4)
    g = 1e-4
    assert pred.guarneri_rate(g) == pytest.approx((g / PI) ** 2, rel=1e-4)


def test_sigma2_delta_longtime_anchor():
    t = np.array([100.0, 120.0])
    y = pred.sigma2_delta_longtime(t, 0.7, anchor=(100.0, 2.0))
    assert y[0] == pytest.approx(2.0)
    assert y[1] / y[0] == pytest.approx(math.exp(pred.guarneri_rate(0.7) * 20))


def test_subdiffusion_scalings():
    base = float(pred.subdiffusion_sigma2(100.0, 4.0, 16.0, coef=0.3))
    assert float(pred.subdiffusion_sigma2(400.0, 4.0, 16.0, coef=0.3)) == \
        pytest.approx(2 * base)
    assert float(pred.subdiffusion_sigma2(100.0, 4.0, 32.0, coef=0.3)) == \
        pytest.approx(4 * base)


def test_calibrate_subdiffusion_roundtrip():
    t = np.linspace(200, 2000, 50)
    y = pred.subdiffusion_sigma2(t, 4.0, 16.0, coef=0.27)
    c = pred.calibrate_subdiffusion(t, y, 4.0, 16.0, (300, 1500))
    assert c == pytest.approx(0.27, rel=1e-12)


def test_condensate_decay_reference_points():
    g, lam = 0.7, 3.03
    te = pred.ehrenfest_time(g, lam)
    tau = pred.tau_depletion(g, lam)
    assert float(pred.condensate_decay(te, g, lam)) == pytest.approx(1.0)
    assert float(pred.condensate_decay(te + tau, g, lam)) == pytest.approx(
        math.exp(-1))


def test_condensate_decay_equals_survival_product():
    g, lam = 0.7, 3.03
    p = pred.growth_probability(g)
    for q in range(1, 11):
        tq = pred.mode_depletion_time(q, g, lam)
        lhs = float(pred.condensate_decay(tq, g, lam))
        rhs = (1 - p) ** (q - 1)
        assert lhs == pytest.approx(rhs, rel=(q - 1) * p**2 + 1e-12)


def test_gaussian_profile():
    val = float(pred.gaussian_profile(0.0, 4.0))
    assert val == pytest.approx(1 / math.sqrt(2 * PI * 4.0))
    q = np.arange(-400, 400)
    total = pred.gaussian_profile(q, 25.0).sum()
    assert total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        pred.gaussian_profile(0.0, -1.0)


# ---------------------------------------------------------------------------
# Langevin surrogate


def test_langevin_zero_coupling_stays_zero():
    s, mean_sq = pred.langevin_mean_square(0.0, 8.0, 0.5, horizon=3,
                                           n_real=100, seed=1)
    assert mean_sq.max() == 0.0


def test_langevin_slope_matches_closed_form():
    g, f, rho = 1.0, 2.0, 0.5
    s, mean_sq = pred.langevin_mean_square(g, f, rho, horizon=5,
                                           n_real=10_000, seed=2)
    slope = np.polyfit(s, mean_sq, 1)[0]
    assert slope == pytest.approx(pred.langevin_slope_prediction(g, f, rho),
                                  rel=0.10)


def test_langevin_scaling_exponents():
    rho = 0.5

    def slope(g, f, seed):
        s, m = pred.langevin_mean_square(g, f, rho, horizon=4,
                                         n_real=6000, seed=seed)
        return np.polyfit(s, m, 1)[0]

    f_exp = math.log(slope(1.0, 4.0, 3) / slope(1.0, 2.0, 4)) / math.log(2)
    g_exp = math.log(slope(2.0, 2.0, 5) / slope(1.0, 2.0, 6)) / math.log(2)
    assert abs(f_exp - 4.0) <= 0.2
    assert abs(g_exp - 2.0) <= 0.1


# ---------------------------------------------------------------------------
# fitters


def test_fit_power_law_exact():
    t = np.geomspace(1, 100, 40)
    fit = pred.fit_power_law(t, 3.0 * t**0.5, (1, 100))
    assert fit.value == pytest.approx(0.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert fit.residual < 1e-12


def test_fit_exponential_exact():
    t = np.linspace(0, 400, 60)
    fit = pred.fit_exponential(t, 2.0 * np.exp(-t / 100.0), (0, 400))
    assert fit.value == pytest.approx(-0.01, abs=1e-8)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-9)


def test_fit_refusals():
    t = np.geomspace(1, 100, 40)
    y = t**0.5
    with pytest.raises(FitRefusedError):
        pred.fit_power_law(t, y, (50, 60))  # span < half a decade
    with pytest.raises(FitRefusedError):
        pred.fit_power_law(t[:5], y[:5], (1, 100))
    y2 = y.copy()
    y2[10] = -1.0
    with pytest.raises(FitRefusedError):
        pred.fit_power_law(t, y2, (1, 100))
    with pytest.raises(FitRefusedError):
        pred.fit_exponential(t, -y, (1, 100))


def test_tau_extraction_pipeline_with_noise():
    g, lam = 1.0, 3.03
    te = pred.ehrenfest_time(g, lam)
    tau = pred.tau_depletion(g, lam)
    t = np.arange(0, 260.0)
    decay = np.minimum(1.0, np.exp(-(t - te) / tau))
    rng = np.random.default_rng(14)
    noisy = decay * (1 + 0.01 * rng.normal(size=t.size))
    fit = pred.extract_tau(t, noisy, g, lam, digits=15)
    tau_hat = -1.0 / fit.value
    assert tau_hat == pytest.approx(tau, rel=0.03)


def test_roundoff_collapse_horizon_scales():
    assert pred.roundoff_collapse_horizon(1.0, 30) == pytest.approx(
        2 * pred.roundoff_collapse_horizon(2.0, 30))
    assert pred.roundoff_collapse_horizon(1.0, 60) == pytest.approx(
        2 * pred.roundoff_collapse_horizon(1.0, 30))
