import math
import warnings

import numpy as np
import pytest

import oracles as O
from conftest import cascade, random_data, sine_data
from degctrl.errors import ConvergenceFailure, HypothesisWarning, InvalidArgument
from degctrl.evolution import control_mask
from degctrl.hum_control import (
    _dense_trajectories,
    _trajectories,
    gramian_apply,
    hum_solve,
    observability_estimate,
    observation_ratio,
    smooth_basis,
)
from degctrl.operators import CoefficientSpec

B_CASCADE = {"b11": (0.0, None), "b12": (0.0, None), "b21": (1.0, (0.4, 0.7)), "b22": (0.0, None)}


def _pair(m, a, b):
    return m.inner(a[0], b[0]) + m.inner(a[1], b[1])


@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_gramian_symmetric_psd(theta, rng):
    cfg = cascade(nx=20, nt=30, theta_scheme=theta)
    m = cfg.mesh()
    for _ in range(4):
        a = random_data(m, rng)
        b = random_data(m, rng)
        la, lb = gramian_apply(cfg, *a), gramian_apply(cfg, *b)
        na, nb = math.sqrt(_pair(m, a, a)), math.sqrt(_pair(m, b, b))
        assert abs(_pair(m, la, b) - _pair(m, a, lb)) <= 1e-12 * na * nb
        assert _pair(m, la, a) >= -1e-14 * na * na


@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_hum_matches_dense_primal_problem(theta):
    cfg = cascade(nx=20, nt=30, theta_scheme=theta)
    m = cfg.mesh()
    u0, v0 = sine_data(m)
    r = hum_solve(cfg, u0, v0, 1e-3, cg_tol=1e-12)
    M = O.coupled_dense(m.nodes, 0.5, 0.75, B_CASCADE)
    x0 = np.concatenate([u0[1:-1], v0[1:-1]])
    free = O.dense_march(M, cfg.dt, theta, x0, cfg.nt)[-1]
    mask = control_mask(m, cfg)[1:-1]
    _, fin, cost = O.dense_hum(M, cfg.dt, theta, mask, cfg.nt, m.cell_weights[1:-1], free, 1e-3)
    got = np.concatenate([r.final_state[0][1:-1], r.final_state[1][1:-1]])
    assert np.linalg.norm(got - fin) <= 1e-8 * np.linalg.norm(fin)
    assert r.cost == pytest.approx(cost, rel=1e-8)


def test_hum_monotone_and_cost_bound():
    cfg = cascade(nx=30, nt=40)
    u0, v0 = sine_data(cfg.mesh())
    finals = []
    for eps in (1e-1, 1e-2, 1e-3):
        r = hum_solve(cfg, u0, v0, eps)
        assert r.final_norm**2 <= 2 * eps * r.cost * (1 + 1e-6)
        assert r.final_norm < r.uncontrolled_final_norm and r.hypothesis_ok
        finals.append(r.final_norm)
    assert finals[0] >= finals[1] >= finals[2]


def test_zero_data_gives_zero_control():
    cfg = cascade(nx=12, nt=10)
    z = np.zeros(13)
    r = hum_solve(cfg, z, z)
    assert r.cg_iterations == 0 and r.final_norm == 0.0 and not np.any(r.control)


def test_convergence_failure_carries_diagnostics():
    cfg = cascade(nx=20, nt=20)
    u0, v0 = sine_data(cfg.mesh())
    with pytest.raises(ConvergenceFailure) as info:
        hum_solve(cfg, u0, v0, 1e-6, cg_tol=1e-14, cg_max_iter=2)
    d = info.value.diagnostics
    assert d["iterations"] == 2 and d["best_iterate"].shape == (2, 21) and d["best_residual"] <= 1.0


def test_bad_arguments():
    cfg = cascade(nx=12, nt=10)
    z = np.zeros(13)
    with pytest.raises(InvalidArgument):
        hum_solve(cfg, z, z, epsilon=0.0)
    with pytest.raises(InvalidArgument):
        hum_solve(cfg, z, z, cg_max_iter=0)


def test_warns_without_cascade_coupling():
    cfg = cascade(nx=12, nt=10, b21=0.0)
    u0, v0 = sine_data(cfg.mesh())
    with pytest.warns(HypothesisWarning):
        r = hum_solve(cfg, u0, v0, 1e-2)
    assert not r.hypothesis_ok
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        hum_solve(cascade(nx=12, nt=10, b21=CoefficientSpec(-1.0, (0.35, 0.75))), u0, v0, 1e-2)


def test_dense_and_marched_trajectories_agree():
    cfg = cascade(nx=12, nt=15, theta_scheme=0.7)
    m = cfg.mesh().n - 1
    eye = np.eye(2 * m).reshape(2 * m, 2, m)
    np.testing.assert_allclose(_dense_trajectories(cfg), _trajectories(cfg, eye), atol=1e-13)


def test_smooth_basis_shape_and_range():
    cfg = cascade(nx=12, nt=5)
    b = smooth_basis(cfg, 8)
    assert b.shape == (8, 2, 11)
    with pytest.raises(InvalidArgument):
        smooth_basis(cfg, 23)


def test_observability_against_dense_oracle(rng):
    cfg = cascade(nx=30, nt=60)
    m = cfg.mesh()
    M = O.coupled_dense(m.nodes, 0.5, 0.75, B_CASCADE, adjoint=True)
    ref = O.dense_observability(M, cfg.dt, 1.0, cfg.nt, m.cell_weights[1:-1], control_mask(m, cfg)[1:-1])
    dense = observability_estimate(cfg, method="dense-oracle").c_obs
    assert dense == pytest.approx(ref, rel=1e-4)
    # the full-space constant bounds every single trajectory quotient
    for _ in range(5):
        assert observation_ratio(cfg, *random_data(m, rng)) <= dense * (1 + 1e-8)


def test_decoupled_is_not_observable():
    cfg = cascade(nx=20, nt=30, b21=0.0)
    for method in ("reduced-basis", "dense-oracle"):
        est = observability_estimate(cfg, 16, method)
        assert math.isinf(est.c_obs) and not est.observable


def test_unknown_method():
    with pytest.raises(InvalidArgument):
        observability_estimate(cascade(nx=10, nt=5), method="svd")
