import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavgraph import graphc, measure, witnesses as wit
from cavgraph.phasespace import GaussianState, conditional_covariance, vacuum

HALF_LN2 = math.log(2) / 2


def _epr_state(r=HALF_LN2):
    res = graphc.compile_graph(graphc.epr_graph(), r)
    return graphc.simulate(res.sequence)


def _square_state(r=HALF_LN2):
    res = graphc.compile_graph(graphc.square_graph(), r)
    return graphc.simulate(res.sequence)


def _product_state(params):
    """Block-diagonal product of single-site states from (log_sq, angle, thermal) triples."""
    M = len(params)
    cov = np.zeros((2 * M, 2 * M))
    for i, (s, a, n) in enumerate(params):
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        c = n * R @ np.diag([math.exp(s), math.exp(-s)]) @ R.T
        idx = [i, M + i]
        cov[np.ix_(idx, idx)] = c
    return GaussianState(np.zeros(2 * M), cov)


site_params = st.tuples(st.floats(-1.5, 1.5), st.floats(0, math.pi), st.floats(1.0, 3.0))


# contrast, Wineland, Mancini

def test_contrast_examples():
    assert wit.contrast_from_populations(500, 0, 500) == pytest.approx(1.0)
    assert wit.contrast_from_populations(450, 100, 450) == pytest.approx(0.70)
    assert wit.contrast_from_populations(1, 1, 1) == pytest.approx(0.0)


def test_contrast_errors_and_clamp():
    with pytest.raises(ValueError):
        wit.contrast_from_populations(0, 0, 0)
    with pytest.warns(UserWarning):
        assert wit.contrast_from_populations(600, 0, 600, N=1000) == 1.0


def test_wineland_examples():
    assert wit.wineland(0.52, 0.825) == pytest.approx(0.63, abs=0.005)
    assert wit.wineland(1.0, 1.0) == 1.0
    assert wit.wineland(0.7, 0.7) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wit.wineland(0.5, 0.0)


def test_mancini_examples():
    assert wit.mancini(0.50, 0.46) == pytest.approx(0.23)
    assert wit.mancini(1, 1) == 1
    with pytest.raises(ValueError):
        wit.mancini(-0.1, 1.0)


# steering

def test_epr_steering_analytic():
    C = wit.rotated_covariance(_epr_state().cov, math.pi / 4)
    res = wit.steering(GaussianState(np.zeros(4), C), [1], [0])
    assert res.var_x == pytest.approx(0.8, abs=1e-9)
    assert res.var_p == pytest.approx(0.8, abs=1e-9)
    assert res.product == pytest.approx(0.64, abs=1e-9)
    assert res.steering
    assert np.allclose(np.abs(res.weights_x), 0.6) and np.allclose(np.abs(res.weights_p), 0.6)


def test_steering_detection_noise_subtracted():
    C = wit.rotated_covariance(_epr_state().cov, math.pi / 4)
    res = wit.steering(GaussianState(np.zeros(4), C), [1], [0], detection_noise=0.05)
    assert res.product == pytest.approx(0.75**2)
    assert res.raw_product == pytest.approx(0.64)


def test_steering_validation():
    s = vacuum(3)
    with pytest.raises(ValueError):
        wit.steering(s, [0], [0, 1])
    with pytest.raises(ValueError):
        wit.steering(s, [0], [])


def test_steering_singular_conditioning_warns():
    cov = np.eye(6)
    cov[np.ix_([1, 2], [1, 2])] = 1.0
    cov[np.ix_([4, 5], [4, 5])] = 1.0
    with pytest.warns(UserWarning):
        res = wit.steering(GaussianState(np.zeros(6), cov), [0], [1, 2])
    assert math.isfinite(res.product)


@settings(max_examples=30, deadline=None)
@given(st.lists(site_params, min_size=3, max_size=3))
def test_product_states_never_steer(params):
    s = _product_state(params)
    assert wit.steering(s, [0], [1, 2]).product >= 1 - 1e-9
    assert wit.steering(s, [1, 2], [0]).product >= 1 - 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(site_params, min_size=4, max_size=4), st.floats(0, math.pi))
def test_product_states_satisfy_mancini(params, ref):
    rep = wit.witness_report(_product_state(params), graphc.square_graph(), reference_angle=ref)
    assert rep.W >= 1 - 1e-9
    assert rep.steering_LR >= 1 - 1e-9 and rep.steering_RL >= 1 - 1e-9
    assert rep.V_avg >= rep.separability_bound - 1e-9


def test_least_squares_weights_equal_schur():
    X = measure.sample(_square_state(0.6), 2000, seed=3)
    for quad in ("x", "p"):
        g = wit.least_squares_weights(X, [2, 3], [0, 1], quad)
        ref = wit.steering(X, [2, 3], [0, 1])
        target = ref.weights_x if quad == "x" else ref.weights_p
        assert np.allclose(g, target, atol=1e-10)


def test_least_squares_residual_equals_conditional():
    X = measure.sample(_epr_state(), 3000, seed=5)
    M = 2
    g = wit.least_squares_weights(X, [1], [0], "x")
    resid = X[:, 1] - g[0] * X[:, 0]
    cov = np.cov(X, rowvar=False)
    cond, _ = conditional_covariance(cov[np.ix_([1, 0], [1, 0])], [0], [1])
    assert np.var(resid, ddof=1) == pytest.approx(cond[0, 0], rel=1e-10)
    assert wit.steering(X, [1], [0]).var_x == pytest.approx(cond[0, 0], rel=1e-10)
    assert M == X.shape[1] // 2


# nullifiers

@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.lists(st.floats(-3, 3), min_size=n * n, max_size=n * n).map(lambda v: (n, v))))
def test_vacuum_nullifiers_are_one(data):
    n, vals = data
    A = np.array(vals).reshape(n, n)
    A = A + A.T
    np.fill_diagonal(A, 0)
    res = wit.nullifier_variances(vacuum(n), graphc.GraphSpec(A))
    assert np.allclose(res.v, 1.0, atol=1e-12)


@pytest.mark.parametrize("r", [0.2, HALF_LN2, 1.3])
def test_compiled_square_nullifiers(r):
    res = wit.nullifier_variances(_square_state(r), graphc.square_graph())
    assert res.mean == pytest.approx(math.exp(-2 * r), abs=1e-9)
    assert res.separable_excluded == (math.exp(-2 * r) < 2 * math.sqrt(2) / 3)


def test_nullifier_size_mismatch():
    with pytest.raises(ValueError):
        wit.nullifier_variances(vacuum(3), graphc.square_graph())


def test_nullifier_samples_have_errors():
    X = measure.sample(_square_state(), 4000, seed=2)
    res = wit.nullifier_variances(X, graphc.square_graph())
    assert res.v_sd.shape == (4,) and np.all(res.v_sd > 0)
    assert abs(res.mean - 0.5) < 4 * res.mean_sd


# areas

def test_areas():
    areas, prod = wit.phase_space_areas([(0.5, 2.0), (0.25, 4.0)])
    assert np.allclose(areas, 1.0) and prod == pytest.approx(1.0)
    areas, prod = wit.phase_space_areas([(0.5, 8.0, 0.1)])
    assert areas[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        wit.phase_space_areas([(-0.1, 2.0)])


# full report

def test_report_on_exact_epr():
    rep = wit.witness_report(_epr_state(), graphc.epr_graph(), contrast=0.9)
    assert rep.zeta2 == pytest.approx(0.5)
    assert rep.xi2 == pytest.approx(0.5 / 0.9)
    assert rep.W == pytest.approx(0.25)
    assert rep.steering_LR == pytest.approx(0.64) and rep.steering_RL == pytest.approx(0.64)
    assert np.allclose(rep.v, 0.5) and rep.separability_bound == pytest.approx(1.0)
    assert np.allclose(rep.areas, 1.0)
    assert all(rep.verdicts.values())
    assert len(rep.steering_table) == 4
    d = rep.to_dict()
    for key in ("zeta2", "xi2", "W", "v", "V_avg", "steering_LR", "steering_RL"):
        assert key in d


def test_report_on_samples_has_ci():
    X = measure.sample(_epr_state(), 3000, seed=9)
    rep = wit.witness_report(X, graphc.epr_graph())
    assert rep.n_trials == 3000
    for key in ("zeta2", "W", "steering_LR", "steering_RL", "v0", "v1", "V_avg", "xi2", "steering_LR_z"):
        assert key in rep.ci
    assert abs(rep.W - 0.25) < 4 * rep.ci["W"]
    assert rep.ci["steering_LR_z"] == pytest.approx((1 - rep.steering_LR) / rep.ci["steering_LR"])


def test_report_rejects_size_mismatch():
    with pytest.raises(ValueError):
        wit.witness_report(vacuum(3), graphc.epr_graph())


def test_bad_source_rejected():
    with pytest.raises(ValueError):
        wit.witness_report(np.zeros((2, 4)), graphc.epr_graph())


# measurement records

def _records(state, graph, n=3000, seed=4, contrast=1.0):
    recs = measure.witness_records(state, graph, n, seed, 1500.0, contrast)
    return {k: (phi, pops) for k, (phi, pops, _) in recs.items()}


def test_records_report_matches_state():
    g = graphc.epr_graph()
    rep = wit.witness_report_from_records(_records(_epr_state(), g), g)
    assert abs(rep.W - 0.25) < 4 * rep.ci["W"]
    assert abs(rep.steering_RL - 0.64) < 4 * rep.ci["steering_RL"]
    assert abs(rep.V_avg - 0.5) < 4 * rep.ci["V_avg"]
    assert rep.C == pytest.approx(1.0)
    assert len(rep.areas) == 2 and all(abs(a - 1) < 0.1 for a in rep.areas)


def test_records_contrast_applied():
    g = graphc.epr_graph()
    rep = wit.witness_report_from_records(_records(_epr_state(), g, contrast=0.8), g)
    assert rep.C == pytest.approx(0.8, abs=1e-9)
    assert rep.xi2 == pytest.approx(rep.zeta2 / 0.8)
    assert abs(rep.zeta2 - 0.4) < 4 * rep.ci["zeta2"]


def test_records_square_nullifiers():
    g = graphc.square_graph()
    rep = wit.witness_report_from_records(_records(_square_state(), g, n=2000), g)
    assert abs(rep.V_avg - 0.5) < 4 * rep.ci["V_avg"]
    assert rep.verdicts["not_fully_separable"]


def test_records_missing_settings():
    g = graphc.epr_graph()
    recs = _records(vacuum(2), g, n=50)
    del recs["null090"]
    with pytest.raises(ValueError, match="null090"):
        wit.witness_report_from_records(recs, g)


def test_records_without_scans_have_no_areas():
    g = graphc.epr_graph()
    recs = {k: v for k, v in _records(vacuum(2), g, n=200).items() if not k.startswith("scan")}
    assert wit.witness_report_from_records(recs, g).areas == []


def test_readout_from_populations():
    out = wit.readout_from_populations(np.array([60.0]), np.array([0.0]), np.array([40.0]))
    assert out[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        wit.readout_from_populations([0], [0], [0])


def test_detection_noise_in_records():
    g = graphc.epr_graph()
    recs = _records(_epr_state(), g, n=500)
    a = wit.witness_report_from_records(recs, g)
    b = wit.witness_report_from_records(recs, g, detection_noise=0.05)
    assert np.allclose(np.array(b.v), np.array(a.v) - 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert b.W == pytest.approx(a.W)
