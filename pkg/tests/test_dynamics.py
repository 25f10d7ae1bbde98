import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from cavgraph import dynamics as dyn
from cavgraph.phasespace import principal_variances

TWO_PI = 2 * math.pi
Q = TWO_PI * 1.2e3


def col1_cavity(**kw):
    base = dict(
        kappa=TWO_PI * 250e3, omega_z=TWO_PI * 2.9e6, delta_c=TWO_PI * (-1.3e6 - 2.9e6),
        stark_shift=TWO_PI * 27, atom_count=15000, q=Q, n_photons=800.0,
        g=TWO_PI * 1.5e6, gamma=TWO_PI * 6.1e6, delta=-TWO_PI * 9.5e9, peak_stark_shift=TWO_PI * 41,
    )
    base.update(kw)
    return dyn.CavityConfig(**base)


def _ode_map(chi, q, t, steps=1000):
    G = dyn.generator(chi, q)
    sol = solve_ivp(lambda _, y: (G @ y.reshape(2, 2)).ravel(), (0, t), np.eye(2).ravel(),
                    method="DOP853", rtol=1e-12, atol=1e-12, max_step=t / steps)
    return sol.y[:, -1].reshape(2, 2)


# cavity parameters

def test_delta_pm_from_drive_detuning():
    cfg = col1_cavity()
    assert cfg.delta_minus == pytest.approx(-TWO_PI * 1.3e6)
    assert cfg.delta_plus == pytest.approx(-TWO_PI * 7.1e6)


def test_col1_interaction_strength():
    assert dyn.interaction_strength(col1_cavity()) == pytest.approx(-TWO_PI * 4.3e3, rel=0.10)


def test_zero_photons_zero_interaction():
    assert dyn.interaction_strength(col1_cavity(n_photons=0.0)) == 0.0


def test_antisymmetric_detunings_cancel():
    cfg = col1_cavity(delta_c=0.0)
    assert abs(dyn.interaction_strength(cfg)) < 1e-9


def test_input_photon_lorentzian():
    cfg = col1_cavity(n_photons=None, n_input=1000.0, delta_c=TWO_PI * 125e3)
    assert cfg.intracavity_photons == pytest.approx(500.0)


def test_cooperativity_consistency_check():
    with pytest.raises(ValueError):
        col1_cavity(eta=1.0)
    cfg = col1_cavity(eta=4 * (TWO_PI * 1.5e6) ** 2 / (TWO_PI * 250e3 * TWO_PI * 6.1e6))
    assert cfg.peak_cooperativity == pytest.approx(5.9, rel=0.05)


@pytest.mark.parametrize("kw", [dict(kappa=0.0), dict(omega_z=-1.0), dict(gamma=0.0), dict(delta=0.0), dict(atom_count=0)])
def test_cavity_config_validation(kw):
    with pytest.raises(ValueError):
        col1_cavity(**kw)


# squeezing rate and map

def test_rate_col1():
    assert dyn.squeezing_rate(-TWO_PI * 4.3e3, Q).value == pytest.approx(TWO_PI * 3.0e3, rel=0.02)


def test_rate_chi_equals_minus_q():
    r = dyn.squeezing_rate(-Q, Q)
    assert r.unstable and r.value == pytest.approx(Q)


def test_stable_regime_is_typed():
    r = dyn.squeezing_rate(0.5 * Q, Q)
    assert r.regime == "stable" and math.isfinite(r.value)
    with pytest.raises(ValueError):
        r.require_unstable()
    assert dyn.squeezing_rate(-0.5 * Q, Q).regime == "marginal"


def test_squeeze_map_identity_at_zero():
    assert np.allclose(dyn.squeeze_map(-Q, Q, 0.0), np.eye(2))


def test_pure_squeeze_chi_minus_q():
    zmin, zmax, _ = dyn.finite_time_squeezing(-Q, Q, 1.0 / Q)
    assert zmin == pytest.approx(math.exp(-2), rel=1e-12)
    assert zmax == pytest.approx(math.exp(2), rel=1e-12)


def test_squeeze_map_nonfinite():
    with pytest.raises(ValueError):
        dyn.squeeze_map(float("inf"), Q, 1.0)


def test_chi_minus_2q_against_ode():
    chi = -2 * Q
    lam = dyn.squeezing_rate(chi, Q).value
    t = 4.0 / lam
    S = _ode_map(chi, Q, t)
    assert np.allclose(dyn.squeeze_map(chi, Q, t), S, rtol=1e-8, atol=1e-8)
    zmin, zmax, phi = principal_variances(S @ S.T)
    phi_wrapped = (phi + math.pi / 2) % math.pi - math.pi / 2
    assert math.degrees(phi_wrapped) == pytest.approx(-30.0, abs=0.05)
    assert zmax * math.exp(-2 * lam * t) == pytest.approx(4 / 3, rel=1e-3)
    amax, amin, aphi = dyn.asymptotic_squeezing(chi, Q, t)
    assert math.degrees(aphi) == pytest.approx(-30.0, abs=1e-9)
    assert amax == pytest.approx(zmax, rel=1e-3)


def test_asymptotic_chi_minus_q():
    zmax, zmin, phi = dyn.asymptotic_squeezing(-Q, Q, 1.0 / Q)
    assert math.degrees(phi) == pytest.approx(-45.0)
    assert zmax == pytest.approx(math.e**2)
    assert zmin * zmax == pytest.approx(1.0)


def test_asymptotic_requires_unstable():
    with pytest.raises(ValueError):
        dyn.asymptotic_squeezing(Q, Q, 1.0)


@pytest.mark.parametrize("chi_over_q", [-1.0, -1.5, -2.0, -4.0])
def test_asymptotic_matches_finite_time_late(chi_over_q):
    chi = chi_over_q * Q
    lam = dyn.squeezing_rate(chi, Q).value
    t = 3.0 / lam
    zmin, zmax, _ = dyn.finite_time_squeezing(chi, Q, t)
    amax, amin, _ = dyn.asymptotic_squeezing(chi, Q, t)
    assert amax == pytest.approx(zmax, rel=0.02)


def test_scan_angle_converges_to_asymptote():
    chi = -3 * Q
    lam = dyn.squeezing_rate(chi, Q).value
    target = math.atan(-Q / lam)
    errs = []
    for lt in (0.5, 1.5, 3.0):
        S = dyn.squeeze_map(chi, Q, lt / lam)
        cov = S @ S.T
        phis = np.linspace(-math.pi / 2, math.pi / 2, 20001)
        var = cov[0, 0] * np.cos(phis) ** 2 + cov[1, 1] * np.sin(phis) ** 2 - 2 * cov[0, 1] * np.sin(phis) * np.cos(phis)
        errs.append(abs(phis[np.argmin(var)] - target))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


@settings(max_examples=60, deadline=None)
@given(chi=st.floats(-5, 5), q=st.floats(0.1, 5), t=st.floats(0, 3))
def test_squeeze_map_symplectic(chi, q, t):
    S = dyn.squeeze_map(chi, q, t)
    assert abs(np.linalg.det(S) - 1) < 1e-8 * max(1.0, np.abs(S).max() ** 2)


@settings(max_examples=40, deadline=None)
@given(chi_over_q=st.floats(-5, -1.01), lt=st.floats(0, 4))
def test_area_preserved(chi_over_q, lt):
    chi = chi_over_q * Q
    t = lt / dyn.squeezing_rate(chi, Q).value
    zmin, zmax, _ = dyn.finite_time_squeezing(chi, Q, t)
    assert zmin * zmax == pytest.approx(1.0, abs=1e-8 * max(1.0, zmax))


# dissipation

def test_lindblad_no_loss_is_exponential():
    t = np.linspace(0, 3 / Q, 7)
    assert np.allclose(dyn.lindblad_variance(-Q, Q, 0, 0, 2, t), np.exp(-2 * Q * t))


def test_lindblad_steady_state():
    v = dyn.lindblad_variance(-Q, Q, 100.0, 5.0, 3, 1e3)
    assert v == pytest.approx((100 + 2 * 3 * 5) / (2 * Q))


def test_lindblad_matches_squeeze_map():
    for lt in (0.1, 0.7, 2.0):
        zmin, _, _ = dyn.finite_time_squeezing(-Q, Q, lt / Q)
        assert abs(dyn.lindblad_variance(-Q, Q, 0, 0, 1, lt / Q) - zmin) < 1e-8


def test_lindblad_rejects_stable():
    with pytest.raises(ValueError):
        dyn.lindblad_variance(Q, Q, 0, 0, 1, 1.0)


def test_col1_collective_decay_noise():
    v = dyn.collective_decay_noise(-TWO_PI * 4.3e3, Q, TWO_PI * 250e3, -TWO_PI * 1.3e6)
    assert v == pytest.approx(0.14, abs=0.01)


def test_dissipation_params_consistency():
    with pytest.raises(ValueError):
        dyn.DissipationParams(gamma_coll=1.0, gamma_plus=1.0, gamma_minus=1.0, atom_count=10)
    p = dyn.DissipationParams(gamma_coll=40.0, gamma_plus=1.0, gamma_minus=1.0, atom_count=10)
    assert p.gamma_coll == 40.0
    with pytest.raises(ValueError):
        dyn.DissipationParams(gamma_sc=-1.0)


def test_col1_scattering():
    cfg = col1_cavity(chi=-TWO_PI * 4.3e3)
    res = dyn.scattering_rate(cfg, 50e-6, M=1)
    assert res.added_variance == pytest.approx(0.02, abs=0.01)
    assert res.valid_regime


def test_scattering_linear_in_modes():
    cfg = col1_cavity(chi=-TWO_PI * 4.3e3)
    a = dyn.scattering_rate(cfg, 50e-6, M=2).added_variance
    b = dyn.scattering_rate(cfg, 50e-6, M=4).added_variance
    assert b == pytest.approx(2 * a)


def test_scattering_vanishes_at_large_cooperativity():
    rates = [dyn.scattering_rate(col1_cavity(chi=-TWO_PI * 4.3e3, atom_count=n), 50e-6).rate for n in (1e4, 1e6, 1e8)]
    assert rates[0] > rates[1] > rates[2] and rates[2] < 1e-3 * rates[0]


def test_scattering_zero_cooperativity():
    with pytest.raises(ValueError):
        dyn.scattering_rate(col1_cavity(stark_shift=0.0, chi=-1.0), 1e-6)


# interaction fluctuations and coupling inhomogeneity

def test_interaction_fluctuation_zero():
    assert dyn.interaction_fluctuation_noise(10, Q, -TWO_PI * 4.3e3, 0.0) == 0.0


def test_interaction_fluctuation_value():
    v = dyn.interaction_fluctuation_noise(10, Q, -TWO_PI * 4.3e3, 0.1)
    assert v == pytest.approx(10 * (1.2 / 7.4) / 2 * 0.01, rel=1e-12)
    assert v == pytest.approx(0.0081, abs=5e-5)


def test_interaction_fluctuation_degenerate():
    with pytest.raises(ValueError):
        dyn.interaction_fluctuation_noise(10, Q, -Q / 2, 0.1)


def test_relative_fluctuation_and_alpha():
    assert dyn.detuning_amplification(0.0, 1.0, 1.0) == 1.0
    assert dyn.relative_interaction_fluctuation(0.05, 0.05, 2.0) == pytest.approx(math.sqrt(0.05**2 + 0.1**2))


def test_coupling_zero_temperature_limit():
    assert dyn.coupling_inhomogeneity_noise(1e6) < 2e-11


def test_coupling_asymptotic_agreement():
    exact = dyn.coupling_inhomogeneity_noise(100.0)
    assert exact == pytest.approx(dyn.coupling_inhomogeneity_asymptotic(100.0), rel=0.10)
    assert exact == pytest.approx(0.0012162, rel=1e-4)


def test_coupling_rejects_nonpositive():
    with pytest.raises(ValueError):
        dyn.coupling_inhomogeneity_noise(0.0)


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(1.0, 1e5))
def test_coupling_noise_in_unit_interval_and_decreasing(beta):
    a = dyn.coupling_inhomogeneity_noise(beta)
    b = dyn.coupling_inhomogeneity_noise(beta * 1.5)
    assert 0 <= b <= a < 1


# budget

def _budget(v0, bs, add, C):
    return dyn.NoiseBudget(v0, list(zip(dyn.BEAM_SPLITTER_LABELS, bs)), list(zip(dyn.ADDITIVE_LABELS, add)), C)


def test_budget_columns():
    assert dyn.combine_budget(_budget(0.13, (0.08, 0.14, 0.02), (0.05, 0.02), 0.89)) == pytest.approx(0.44, abs=0.01)
    assert dyn.combine_budget(_budget(0.28, (0.08, 0.07, 0.07), (0.05, 0.02), 0.89)) == pytest.approx(0.56, abs=0.01)


def test_empty_budget():
    assert dyn.combine_budget(dyn.NoiseBudget(0.37)) == pytest.approx(0.37)


@pytest.mark.parametrize("kw", [dict(contrast=0.0), dict(contrast=1.2), dict(beam_splitter_terms=[("x", 1.0)])])
def test_budget_validation(kw):
    with pytest.raises(ValueError):
        dyn.NoiseBudget(0.1, **kw)


@settings(max_examples=60, deadline=None)
@given(
    entries=st.lists(st.floats(0, 0.3), min_size=6, max_size=6),
    idx=st.integers(0, 5), bump=st.floats(0, 0.3), C=st.floats(0.3, 1.0), dC=st.floats(0, 0.2),
)
def test_budget_monotone(entries, idx, bump, C, dC):
    base = _budget(entries[0], entries[1:4], entries[4:6], C)
    raised = list(entries)
    raised[idx] = min(raised[idx] + bump, 0.99)
    up = _budget(raised[0], raised[1:4], raised[4:6], C)
    assert dyn.combine_budget(up) >= dyn.combine_budget(base) - 1e-12
    lower_c = _budget(entries[0], entries[1:4], entries[4:6], max(C - dC, 0.01))
    assert dyn.combine_budget(lower_c) >= dyn.combine_budget(base) - 1e-12


# design helpers

def test_optimal_detuning_examples():
    kappa = TWO_PI * 250e3
    _, floor = dyn.optimal_detuning(4800, 1.0, 1, kappa)
    assert floor == pytest.approx(0.2)
    d, _ = dyn.optimal_detuning(192, 1.0, 1, kappa)
    assert d == pytest.approx(kappa)
    assert dyn.optimal_detuning(2e4, 2.0, 8, kappa)[1] == pytest.approx(dyn.optimal_detuning(1e4, 2.0, 4, kappa)[1])
    with pytest.raises(ValueError):
        dyn.optimal_detuning(0, 1.0, 1, kappa)


def test_microwave_phase():
    assert dyn.microwave_spinor_phase(0.0, 1.0) == pytest.approx(math.pi)
    assert dyn.microwave_spinor_phase(1e9, 1.0) < 1e-8
    assert dyn.microwave_spinor_phase(1.0, 1.0) == pytest.approx(math.pi * (1 - 1 / math.sqrt(2)))
    with pytest.raises(ValueError):
        dyn.microwave_spinor_phase(0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(-1e3, 1e3), r=st.floats(1e-3, 1e3))
def test_microwave_phase_range(d, r):
    assert 0 < dyn.microwave_spinor_phase(d, r) < 2 * math.pi
