import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from conftest import cascade
from degctrl.errors import InvalidArgument, SingularIntegralError
from degctrl.operators import (
    CoefficientSpec,
    SystemConfig,
    assemble_coupled,
    assemble_diffusion,
    build_mesh,
    quadrature_weights,
    weighted_gradient_integral,
    weighted_integral,
)

# largest eigenvalue of the alpha = 0.5 operator, nx = 50, grading 2, from the loop-assembled oracle
TOP_EIG_NX50 = -4.781275423529902


alphas = st.floats(0.05, 0.95)
gradings = st.floats(1.0, 4.0)
sizes = st.integers(6, 40)


@given(sizes, gradings)
def test_mesh_nodes_and_weights_match_oracle(n, q):
    m = build_mesh(n, q)
    np.testing.assert_allclose(m.nodes, O.graded_nodes(n, q), rtol=0, atol=1e-15)
    np.testing.assert_allclose(m.cell_weights, O.lumped_weights(m.nodes), rtol=1e-13)
    assert math.isclose(m.cell_weights.sum(), 1.0, rel_tol=1e-13)


@pytest.mark.parametrize("bad", [(3, 2.0), (10, 0.5), (2.5, 2.0)])
def test_mesh_rejects_bad_input(bad):
    with pytest.raises(InvalidArgument):
        build_mesh(*bad)


@given(alphas, sizes, gradings)
def test_diffusion_matches_loop_assembly(alpha, n, q):
    m = build_mesh(n, q)
    ref = O.diffusion_dense(m.nodes, alpha)
    np.testing.assert_allclose(assemble_diffusion(m, alpha).to_dense(), ref, rtol=1e-12, atol=0)


@given(alphas, sizes)
def test_stiffness_symmetric_negative_definite(alpha, n):
    K = assemble_diffusion(build_mesh(n), alpha).stiffness()
    assert np.max(np.abs(K - K.T)) <= 1e-12 * np.max(np.abs(K))
    assert np.max(np.linalg.eigvalsh(0.5 * (K + K.T))) < 0


@given(alphas, st.integers(0, 2**32 - 1))
def test_energy_is_minus_weighted_form(alpha, seed):
    m = build_mesh(30)
    op = assemble_diffusion(m, alpha)
    u = np.random.default_rng(seed).standard_normal(m.n + 1)
    u[0] = u[-1] = 0.0
    assert math.isclose(op.energy(u), -m.inner(op.apply(u), u), rel_tol=1e-12)


def test_top_eigenvalue_frozen():
    m = build_mesh(50, 2.0)
    w = m.cell_weights[1:-1]
    K = assemble_diffusion(m, 0.5).stiffness()
    # generalized problem K v = lam W v through the symmetric similarity
    S = K / np.sqrt(np.outer(w, w))
    assert math.isclose(np.max(np.linalg.eigvalsh(0.5 * (S + S.T))), TOP_EIG_NX50, rel_tol=1e-10)


def test_alpha_out_of_range():
    with pytest.raises(InvalidArgument):
        assemble_diffusion(build_mesh(10), 1.0)
    with pytest.raises(InvalidArgument):
        SystemConfig(0.5, 1.2, 1.0)


def test_coupled_matches_oracle():
    cfg = cascade(nx=20, nt=10, b11=0.3, b12=CoefficientSpec(-0.7, (0.1, 0.5)), b22=2.0)
    x = cfg.mesh().nodes
    b = {
        "b11": (0.3, None),
        "b12": (-0.7, (0.1, 0.5)),
        "b21": (1.0, (0.4, 0.7)),
        "b22": (2.0, None),
    }
    np.testing.assert_allclose(assemble_coupled(cfg.mesh(), cfg).toarray(), O.coupled_dense(x, 0.5, 0.75, b), rtol=1e-12)


def test_omega1_must_sit_inside_omega():
    with pytest.raises(InvalidArgument):
        SystemConfig(0.5, 0.5, 1.0, omega=(0.3, 0.8), omega1=(0.3, 0.6))


def test_coefficient_bounds_on_subinterval():
    c = CoefficientSpec(2.0, (0.4, 0.7))
    assert c.lower_bound_on((0.4, 0.7)) == 2.0
    assert c.lower_bound_on((0.3, 0.7)) == 0.0
    assert CoefficientSpec(-1.0, (0.4, 0.7)).upper_bound_on((0.35, 0.6)) == 0.0


@pytest.mark.parametrize("p", [-0.5, 0.0, 0.7, 2.0])
def test_quadrature_exact_for_linear_data(p):
    m = build_mesh(17, 2.0)
    g = 0.3 + 1.7 * m.nodes
    exact = 0.3 / (p + 1) + 1.7 / (p + 2)
    assert math.isclose(weighted_integral(m, p, g), exact, rel_tol=1e-13)
    assert math.isclose(quadrature_weights(m, p) @ g, exact, rel_tol=1e-13)


def test_quadrature_subinterval_against_mpmath():
    m = build_mesh(400, 2.0)
    g = np.sin(np.pi * m.nodes)
    ref = O.mp_quad(lambda t: t**-0.3 * mp.sin(mp.pi * t), 0.2, 0.9)
    assert math.isclose(weighted_integral(m, -0.3, g, interval=(0.2, 0.9)), ref, rel_tol=1e-4)


@pytest.mark.parametrize("p,r", [(-2.5, 1.8), (-1.5, 0.75), (0.2, 0.5)])
def test_monomial_first_panel_exact(p, r):
    m = build_mesh(8, 3.0)
    x = m.nodes
    # exact over the first cell thanks to the power-law model; linear elsewhere
    val = weighted_integral(m, p, x**r, interval=(0.0, x[1]), vanishes_at_zero=True)
    assert math.isclose(val, x[1] ** (p + r + 1) / (p + r + 1), rel_tol=1e-12)


def test_gradient_integral_against_mpmath():
    m = build_mesh(800, 2.0)
    g = m.nodes * (1 - m.nodes)
    ref = O.mp_quad(lambda t: t**0.5 * (1 - 2 * t) ** 2, 0, 1)
    assert math.isclose(weighted_gradient_integral(m, 0.5, g), ref, rel_tol=1e-4)


def test_singular_exponent_without_model_raises():
    m = build_mesh(20)
    with pytest.raises(SingularIntegralError):
        weighted_integral(m, -1.5, 1.0 + m.nodes)
    with pytest.raises(SingularIntegralError):
        quadrature_weights(m, -1.0)


def test_divergent_power_law_raises():
    m = build_mesh(20)
    with pytest.raises(SingularIntegralError):
        weighted_integral(m, -2.5, m.nodes**1.2, vanishes_at_zero=True)
