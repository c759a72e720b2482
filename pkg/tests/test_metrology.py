import math
import warnings

import numpy as np
import pytest

from nlinterface import atomic, metrology, tensors
from nlinterface.errors import MixedRegimeError
from nlinterface.metrology import (
    BeamParameters,
    MetrologyScenario,
    TwoModeState,
    coherent_state,
    crossover,
    faraday_output,
    local_slope,
    monte_carlo_estimate,
    scaling_exponent,
    sensitivity,
    sensitivity_curve,
    snr_condition,
    stokes_operators,
    twisting_evolve,
    twisting_qfi,
)

HBAR = 1.0  # dimensionless scenarios keep the algebra readable


def scenario(alpha1=1.0, beta1=0.0, tau=1.0, gamma=1.0, s0=100.0, jz=0.0):
    return MetrologyScenario(alpha1, beta1, tau, gamma, s0, jz, hbar=HBAR)


def physical_scenario(constants, laser, zero=None):
    det = atomic.DetuningSet.from_laser(constants, laser)
    a1 = atomic.coefficient_to_si(tensors.closed_form_alpha(det)[0], 2, constants)
    b1 = atomic.coefficient_to_si(tensors.closed_form_beta(det)[2], 4, constants)
    a1 = 0.0 if zero == "alpha1" else a1
    b1 = 0.0 if zero == "beta1" else b1
    beam = BeamParameters.from_wavelength(780.241e-9, 1e-6, 1e-8)
    return MetrologyScenario(a1, b1, 1e-6, beam.gamma, 1.0)


def test_beam_gamma():
    b = BeamParameters(omega=2.0, duration=3.0, area=5.0, impedance=7.0)
    assert b.gamma == pytest.approx(metrology.sc.hbar * 2 * 7 / (2 * 3 * 5))
    with pytest.raises(ValueError):
        BeamParameters(omega=-1.0, duration=1.0, area=1.0)


def test_faraday_basic():
    r = faraday_output(scenario(jz=0.0))
    assert r.phi == 0 and r.mean_sy_out == 0
    lin1 = faraday_output(scenario(s0=10.0, jz=1e-3))
    lin2 = faraday_output(scenario(s0=1000.0, jz=1e-3))
    assert lin1.phi == lin2.phi
    assert faraday_output(scenario(jz=2e-3)).phi == pytest.approx(2 * lin1.phi)
    with pytest.warns(UserWarning):
        big = faraday_output(scenario(jz=1.0))
    assert not big.small_rotation


@pytest.mark.parametrize("n", [4, 7, 12])
def test_faraday_matches_commutator_oracle(n):
    # first-order Heisenberg evolution S_Y + i tau [H, S_Y] with
    # H = alpha1 gamma S_Z J_Z, evaluated in the X-polarized coherent state
    alpha1, gamma, tau, jz = 0.3, 1.7, 0.05, 0.02
    sx, sy, sz = stokes_operators(n)
    H = alpha1 * gamma * sz * jz
    sy_out = sy + 1j * tau * (H @ sy - sy @ H)
    psi = coherent_state(n).amplitudes
    exact = np.vdot(psi, sy_out @ psi).real
    r = faraday_output(scenario(alpha1=alpha1, gamma=gamma, tau=tau, s0=n / 2, jz=jz))
    assert r.mean_sy_out == pytest.approx(exact, rel=1e-12)


def test_sensitivity_specializations():
    s = scenario(alpha1=2.0, s0=50.0, tau=0.5, gamma=3.0)
    assert sensitivity(s) == pytest.approx(HBAR / (math.sqrt(2) * 0.5 * 3.0 * 2.0 * math.sqrt(50.0)))
    s2 = MetrologyScenario(2.0, 0.0, 1.0, 3.0, 50.0, hbar=HBAR)
    assert sensitivity(s2) == pytest.approx(sensitivity(s) / 2)
    nl = scenario(alpha1=0.0, beta1=1.0)
    ratio = sensitivity(nl.with_s0(400.0)) / sensitivity(nl.with_s0(100.0))
    assert ratio == pytest.approx(4 ** -1.5)
    with pytest.raises(ZeroDivisionError):
        sensitivity(scenario(alpha1=0.0, beta1=0.0))
    with pytest.raises(ValueError):
        sensitivity(s, form="other")


def test_half_form_differs_only_in_nonlinear_term():
    lin = scenario(alpha1=1.0, beta1=0.0)
    assert sensitivity(lin, "half") == sensitivity(lin)
    nl = scenario(alpha1=0.0, beta1=1.0)
    assert sensitivity(nl, "half") == pytest.approx(2 * sensitivity(nl))


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (0.0, 0.01), (1.0, 0.003), (-2.0, 0.5)])
def test_sensitivity_solves_snr_condition(a, b):
    s = scenario(alpha1=a, beta1=b, tau=0.7, gamma=1.3, s0=77.0)
    dj = sensitivity(s)
    lhs, rhs = snr_condition(s, dj)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_crossover_definition():
    assert crossover(2.0, 1.0, 2.0).s0 == 1.0
    a1, b1, g = 3.0, 0.02, 1.5
    c = crossover(a1, b1, g)
    assert abs(a1 * math.sqrt(c.s0)) == pytest.approx(abs(b1 * g * c.s0**1.5))
    assert c.cancellation is None
    assert crossover(a1, -b1, g).cancellation == pytest.approx(c.s0)
    with pytest.raises(ValueError):
        crossover(0.0, 1.0, 1.0)


def test_crossover_vanishes_at_point_a(constants):
    root = tensors.find_roots("alpha1", 30, 40, constants)[0].root
    s = physical_scenario(constants, root)
    off = physical_scenario(constants, root + 1e-3)
    at_root = crossover(s.alpha1, s.beta1, s.gamma).s0
    # the crossover collapses toward zero photons as the root is approached;
    # what is left reflects the 1e-6 MHz root tolerance
    assert at_root < 1e-2 * crossover(off.alpha1, off.beta1, off.gamma).s0
    assert at_root < 100


def test_exact_power_laws():
    n = np.logspace(2, 6, 12)
    lin = scenario(alpha1=1.0)
    nl = scenario(alpha1=0.0, beta1=1.0)
    assert scaling_exponent(n, [sensitivity(lin.with_s0(x / 2)) for x in n]) == pytest.approx(-0.5, abs=1e-10)
    assert scaling_exponent(n, [sensitivity(nl.with_s0(x / 2)) for x in n]) == pytest.approx(-1.5, abs=1e-10)


def test_mixed_curve_asymptotes():
    a1, b1, g = 1.0, 1e-4, 1.0
    s = scenario(alpha1=a1, beta1=b1, gamma=g)
    s_star = crossover(a1, b1, g).s0
    n = 2 * s_star * np.logspace(2, 6, 12)
    slope = scaling_exponent(n, [sensitivity(s.with_s0(x / 2)) for x in n], crossover_n=2 * s_star)
    assert slope == pytest.approx(-1.5, abs=0.01)
    assert local_slope(s, s_star / 10) == pytest.approx(-0.5, abs=0.1)
    assert local_slope(s, s_star * 10) == pytest.approx(-1.5, abs=0.1)


def test_scaling_exponent_preconditions():
    with pytest.raises(ValueError):
        scaling_exponent(np.logspace(0, 3, 5), np.ones(5))
    with pytest.raises(ValueError):
        scaling_exponent(np.logspace(0, 1, 12), np.ones(12))
    with pytest.raises(MixedRegimeError):
        scaling_exponent(np.logspace(0, 4, 12), np.ones(12), crossover_n=100.0)


def test_physical_scaling_at_roots(constants):
    grid = np.logspace(6, 12, 20)
    for zero, expected in (("beta1", -0.5), ("alpha1", -1.5)):
        s = physical_scenario(constants, 35.8436 if zero == "alpha1" else 31.4768, zero)
        rows = sensitivity_curve(s, grid)
        assert scaling_exponent(grid, [r[1] for r in rows]) == pytest.approx(expected, abs=0.01)


def test_monte_carlo_statistics():
    s = scenario(alpha1=1e-3, s0=1e4, jz=0.0)
    mc = monte_carlo_estimate(s, 100_000, seed=12345)
    analytic = sensitivity(s)
    assert abs(mc.mean) < 3 * mc.stderr_mean
    assert abs(mc.std - analytic) < 3 * mc.stderr_std
    biased = monte_carlo_estimate(scenario(alpha1=1e-3, s0=1e4, jz=5.0), 100_000, seed=1)
    assert abs(biased.mean - 5.0) < 3 * biased.stderr_mean


def test_monte_carlo_determinism():
    s = scenario(alpha1=1e-3, s0=1e4, jz=0.2)
    a = monte_carlo_estimate(s, 25_000, seed=99, batch=7_000)
    b = monte_carlo_estimate(s, 25_000, seed=99, batch=7_000)
    assert np.array_equal(a.estimates, b.estimates)
    c = monte_carlo_estimate(s, 25_000, seed=100, batch=7_000)
    assert not np.array_equal(a.estimates, c.estimates)


def test_monte_carlo_preconditions():
    with pytest.raises(ValueError):
        monte_carlo_estimate(scenario(), 10, seed=0)
    with pytest.raises(ZeroDivisionError):
        monte_carlo_estimate(scenario(alpha1=0.0, beta1=0.0), 1000, seed=0)
    with pytest.raises(ValueError):
        sensitivity_curve(scenario(), [10.0], trials=1000, seed=None)


def test_curve_csv_and_nan_columns():
    rows = sensitivity_curve(scenario(), [10.0, 100.0])
    text = metrology.curve_to_csv(rows)
    assert text.splitlines()[0] == "N_L,delta_JZ_analytic,delta_JZ_montecarlo,mc_stderr"
    assert "nan" in text.splitlines()[1]


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_stokes_commutators_exact(n):
    sx, sy, sz = stokes_operators(n)
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    assert np.allclose(sy @ sz - sz @ sy, 1j * sx, atol=1e-12)
    assert np.allclose(sz @ sx - sx @ sz, 1j * sy, atol=1e-12)
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(casimir, (n / 2) * (n / 2 + 1) * np.eye(n + 1), atol=1e-10)


def test_coherent_state_noise():
    r = twisting_evolve(40, 0.0)
    assert np.allclose(r.mean, [20, 0, 0], atol=1e-12)
    assert r.covariance[1, 1] == pytest.approx(10.0) and r.covariance[2, 2] == pytest.approx(10.0)
    assert r.min_variance == pytest.approx(10.0)


def test_tilted_coherent_state_direction():
    psi = coherent_state(30, 0.4)
    mean = psi.mean_spin()
    assert np.allclose(mean, 15 * np.array([math.cos(0.4), 0, math.sin(0.4)]), atol=1e-10)


def kitagawa_ueda_min_variance(n, mu):
    a = 1 - math.cos(mu) ** (n - 2)
    b = 4 * math.sin(mu / 2) * math.cos(mu / 2) ** (n - 2)
    return n / 4 * (1 + (n - 1) * a / 4 - (n - 1) * math.sqrt(a * a + b * b) / 4)


@pytest.mark.parametrize("n,chi_t", [(40, 0.02), (100, 0.01), (200, 0.003), (20, 0.1)])
def test_squeezing_matches_analytic_formula(n, chi_t):
    r = twisting_evolve(n, chi_t)
    assert r.min_variance == pytest.approx(kitagawa_ueda_min_variance(n, 2 * chi_t), rel=1e-9)
    assert r.min_variance < n / 4


def test_twisting_conservation_laws():
    r0 = twisting_evolve(60, 0.0, 0.5)
    r = twisting_evolve(60, 0.3, 0.5)
    assert r.state.norm() == pytest.approx(1.0, abs=1e-12)
    assert r.mean[2] == pytest.approx(r0.mean[2], abs=1e-10)
    assert r.state.n_photons == 60


def test_twisting_limits():
    with pytest.raises(ValueError):
        twisting_evolve(2001, 0.1)
    with pytest.raises(ValueError):
        twisting_evolve(10, 0.1, tilt=2.0)
    with pytest.raises(ValueError):
        TwoModeState(np.array([1.0, 1.0]))


def test_qfi_of_eigenstate_is_zero():
    assert twisting_qfi(coherent_state(12, math.pi / 2)) == 0.0


@pytest.mark.parametrize("n", [1, 2, 5, 11, 20])
@pytest.mark.parametrize("tilt", [0.0, 0.3, math.pi / 4, 1.2])
def test_qfi_matches_brute_force(n, tilt):
    psi = coherent_state(n, tilt).amplitudes
    _, _, sz = stokes_operators(n)
    g = sz @ sz
    gpsi = g @ psi
    brute = 4 * (np.vdot(gpsi, gpsi).real - np.vdot(psi, gpsi).real ** 2)
    got = twisting_qfi(TwoModeState(psi))
    assert got == pytest.approx(brute, rel=1e-10, abs=1e-10)


def test_optimal_tilt_scaling_small():
    ns = np.array([50, 100, 200, 400])
    prec = [1 / math.sqrt(metrology.optimal_tilt_qfi(int(n))[1]) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(prec), 1)[0]
    assert slope == pytest.approx(-1.5, abs=0.15)


def test_twist_report_schema():
    d = twisting_evolve(10, 0.05).as_dict()
    assert set(d) == {"N", "chi_t", "tilt", "mean_S", "covariance", "min_variance", "qfi"}
