import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from conftest import cascade, random_data
from degctrl.errors import DomainError, HypothesisViolated, InvalidArgument, SingularIntegralError
from degctrl.evolution import solve_adjoint_forward
from degctrl.inequality_lab import (
    COUPLED_VARIANTS,
    CarlemanSpec,
    RatioEntry,
    ScalarField,
    SourceField,
    boundary_derivative,
    caccioppoli_check,
    carleman_coupled,
    carleman_single,
    empirical_s0,
    hardy_constant,
    hardy_ratio,
    lemma_absorption_check,
    manufacture_solution,
    s_grid,
    summarize,
    sweep_s,
)
from degctrl.operators import CoefficientSpec, build_mesh
from degctrl.weights import WeightParams, build_sigma, lambda_interval

# f for profile poly, alpha = 1/2, T = 1 at (t, x) = (1/2, 1/4), from sympy
POLY_SPOT = 0.125

OMEGA_PRIME = (0.425, 0.675)


def weight_params(beta=0.75, T=1.0):
    return WeightParams(T, beta, build_sigma(0.1, 0.55, (0.5, 0.6)))


@pytest.fixture(scope="module")
def single_fixture():
    cfg = cascade(nx=40, nt=60)
    sol = manufacture_solution("poly", 0.6, 1.0, cfg.mesh(), cfg.times())
    return sol, weight_params()


@pytest.fixture(scope="module")
def coupled_fixture():
    cfg = cascade(nx=40, nt=60)
    U0, V0 = random_data(cfg.mesh(), np.random.default_rng(7))
    return cfg, solve_adjoint_forward(cfg, U0, V0), weight_params()


# --- Hardy -----------------------------------------------------------------


def test_hardy_constant_values():
    assert hardy_constant(-1.0) == 1.0
    assert hardy_constant(0.0) == 4.0
    assert hardy_constant(0.5) == 16.0


@given(st.sampled_from([-1.0, -0.5, 0.0, 0.5]), st.floats(0.15, 1.0))
def test_hardy_matches_inverse_square_law(gamma, offset):
    m = build_mesh(400, 8.0)
    r = (1 - gamma) / 2 + offset
    res = hardy_ratio(gamma, m.nodes**r, m)
    assert abs(res.ratio * r**2 - 1.0) <= 1e-3
    assert res.passed and res.lhs <= res.c_gamma * res.rhs_integral * (1 + 1e-3)


def test_hardy_errors():
    m = build_mesh(20)
    with pytest.raises(DomainError):
        hardy_ratio(1.0, m.nodes, m)
    with pytest.raises(InvalidArgument):
        hardy_ratio(0.0, 1.0 + m.nodes, m)


def test_hardy_against_mpmath_for_smooth_profile():
    m = build_mesh(400, 8.0)
    x = m.nodes
    v = x * (1 - x)
    res = hardy_ratio(0.0, v, m)
    lhs = O.mp_quad(lambda t: (1 - t) ** 2, 0, 1)
    rhs = O.mp_quad(lambda t: (1 - 2 * t) ** 2, 0, 1)
    assert res.lhs == pytest.approx(lhs, rel=1e-3)
    assert res.rhs_integral == pytest.approx(rhs, rel=1e-3)


# --- manufactured solutions ----------------------------------------------


def test_poly_spot_value_frozen():
    f, _, t, x = O.manufactured_source("poly", 0.5, 1)
    assert float(f.subs({t: sym.Rational(1, 2), x: sym.Rational(1, 4)})) == POLY_SPOT
    m = build_mesh(4, 1.0)
    sol = manufacture_solution("poly", 0.5, 1.0, m, np.array([0.5]))
    assert sol.f.values[0, 1] == pytest.approx(POLY_SPOT, rel=1e-14)


@pytest.mark.parametrize("profile", ["poly", "decay", "sine"])
@pytest.mark.parametrize("alpha", [0.3, 0.6])
def test_sources_match_symbolic(profile, alpha):
    m = build_mesh(16)
    times = np.linspace(0, 1.5, 7)
    f, y, t, x = O.manufactured_source(profile, alpha, 1.5)
    F = sym.lambdify((t, x), f, "numpy")
    Y = sym.lambdify((t, x), y, "numpy")
    sol = manufacture_solution(profile, alpha, 1.5, m, times)
    X = m.nodes[1:]
    ref = F(times[:, None], X[None, :])
    got = sol.f.regular[:, 1:] * X**sol.f.singular_power
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(sol.y.values, Y(times[:, None], m.nodes[None, :]), atol=1e-15)
    assert np.all(sol.y.values[:, [0, -1]] == 0.0)


def test_unknown_profile():
    with pytest.raises(InvalidArgument):
        manufacture_solution("cubic", 0.5, 1.0, build_mesh(8), [0.0, 1.0])


def test_boundary_derivative_exact_for_quadratics():
    m = build_mesh(13, 2.5)
    x = m.nodes
    vals = np.vstack([3 * x**2 - x + 2, x * (1 - x)])
    np.testing.assert_allclose(boundary_derivative(m, vals), [5.0, -1.0], rtol=1e-11)


# --- s0 and reports ------------------------------------------------------


@pytest.mark.parametrize("T,beta", [(1.0, 0.75), (2.0, 0.8), (0.5, 0.6)])
def test_empirical_s0_matches_closed_form(T, beta):
    p = weight_params(beta, T)
    lam = 0.5 * sum(lambda_interval(5, 3))
    # max over x of varphi(0.05 T, x) is attained at x = 1
    top = (0.05 * T * 0.95 * T) ** -4 * lam * (1 - 5)
    cands = 10.0 ** np.linspace(-12, 6, 145)
    expect = cands[np.argmax(2 * cands * top < math.log(1e-12))]
    assert empirical_s0(p, build_mesh(60)) == expect


def test_s_grid_spans_one_decade():
    g = s_grid(2.0, 8)
    assert len(g) == 8 and g[0] == 2.0 and g[-1] == pytest.approx(20.0, rel=1e-14)


def test_summarize_slope_and_flags():
    s = np.geomspace(1, 10, 6)
    rep = summarize([RatioEntry(v, v**0.5, 1.0, "x") for v in s])
    assert rep.slope == pytest.approx(0.5, abs=1e-12) and rep.monotone_increasing and not rep.bounded
    rep = summarize([RatioEntry(v, 1.0, v, "x") for v in s])
    assert rep.slope == pytest.approx(-1.0) and rep.bounded and rep.monotone_decreasing
    assert RatioEntry(1.0, 0.0, 0.0, "x").ratio == 0.0
    assert math.isinf(RatioEntry(1.0, 1.0, 0.0, "x").ratio)


def test_mu_check():
    p = weight_params()
    CarlemanSpec(p, (1.0, 2.0), OMEGA_PRIME, 0.75, 1.25).check(0.5, 0.75)
    with pytest.raises(InvalidArgument):
        CarlemanSpec(p, (1.0,), OMEGA_PRIME, 0.0, 0.0).check(0.5, 0.75)


# --- Carleman ratios -----------------------------------------------------


def _zero_single(sol):
    y = ScalarField(sol.y.mesh, sol.y.times, np.zeros_like(sol.y.values))
    f = SourceField(sol.f.mesh, sol.f.times, np.zeros_like(sol.f.regular), sol.f.singular_power)
    return y, f


@pytest.mark.parametrize("variant", ["full-boundary", "localized"])
def test_single_zero_and_scaling(single_fixture, variant):
    sol, p = single_fixture
    s = 1e-6
    e = carleman_single(sol.y, sol.f, p, s, variant, alpha=0.6, omega_prime=OMEGA_PRIME)
    assert e.lhs > 0 and e.rhs > 0 and math.isfinite(e.ratio)
    for c in (-3.0, 1e-4, 250.0):
        ec = carleman_single(sol.y.scaled(c), sol.f.scaled(c), p, s, variant, alpha=0.6, omega_prime=OMEGA_PRIME)
        assert abs(ec.ratio / e.ratio - 1) <= 1e-12
    z = carleman_single(*_zero_single(sol), p, s, variant, alpha=0.6, omega_prime=OMEGA_PRIME)
    assert (z.lhs, z.rhs, z.ratio) == (0.0, 0.0, 0.0)


def test_single_requires_beta_and_integrable_source(single_fixture):
    sol, p = single_fixture
    with pytest.raises(InvalidArgument):
        carleman_single(sol.y, sol.f, weight_params(beta=0.5), 1e-6, alpha=0.6)
    cfg = cascade(nx=20, nt=20)
    half = manufacture_solution("poly", 0.5, 1.0, cfg.mesh(), cfg.times())
    with pytest.raises(SingularIntegralError):
        carleman_single(half.y, half.f, weight_params(), 1e-6, alpha=0.5)
    decay = manufacture_solution("decay", 0.6, 1.0, cfg.mesh(), cfg.times())
    with pytest.raises(SingularIntegralError):
        carleman_single(decay.y, decay.f, weight_params(), 1e-6, alpha=0.6)


@given(st.floats(-7, 2), st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
def test_coupled_scaling_invariance(coupled_fixture, log_s, c):
    cfg, field, p = coupled_fixture
    s = 10.0**log_s
    scaled = type(field)(field.mesh, field.times, c * field.u, c * field.v)
    for variant in COUPLED_VARIANTS:
        e = carleman_coupled(field, p, s, variant, cfg, OMEGA_PRIME, (0.75, 1.25))
        ec = carleman_coupled(scaled, p, s, variant, cfg, OMEGA_PRIME, (0.75, 1.25))
        assert e.lhs >= 0 and e.rhs >= 0 and math.isfinite(e.lhs) and math.isfinite(e.rhs)
        if e.ratio > 0:
            assert abs(ec.ratio / e.ratio - 1) <= 1e-12


def test_coupled_zero_field(coupled_fixture):
    cfg, field, p = coupled_fixture
    zero = type(field)(field.mesh, field.times, 0 * field.u, 0 * field.v)
    for variant in COUPLED_VARIANTS:
        e = carleman_coupled(zero, p, 1e-5, variant, cfg, OMEGA_PRIME, (0.75, 1.25))
        assert (e.lhs, e.rhs) == (0.0, 0.0)


def test_one_force_needs_coupling_hypothesis(coupled_fixture):
    _, field, p = coupled_fixture
    for cfg in (cascade(nx=40, nt=60, b21=0.0), cascade(nx=40, nt=60, omega1=None)):
        with pytest.raises(HypothesisViolated):
            carleman_coupled(field, p, 1e-5, "one-force", cfg, OMEGA_PRIME)
        with pytest.raises(HypothesisViolated):
            lemma_absorption_check(field, p, 1e-5, cfg)
    negative = cascade(nx=40, nt=60, b21=CoefficientSpec(-2.0, (0.4, 0.7)))
    assert math.isfinite(carleman_coupled(field, p, 1e-5, "one-force", negative, OMEGA_PRIME).ratio)


def test_coupled_fixture_bounded_over_decade():
    cfg = cascade(nx=40, nt=60, b21=1.0)
    U0, V0 = random_data(cfg.mesh(), np.random.default_rng(3))
    field = solve_adjoint_forward(cfg, U0, V0)
    p = weight_params()
    s0 = empirical_s0(p, cfg.mesh())
    for variant in ("two-observation", "one-force"):
        rep = sweep_s(lambda s: carleman_coupled(field, p, s, variant, cfg, OMEGA_PRIME), s_grid(s0), s0)
        assert rep.finite and rep.bounded, (variant, rep.slope)


def test_caccioppoli(coupled_fixture):
    cfg, field, p = coupled_fixture
    e = caccioppoli_check(field, p, cfg.omega, OMEGA_PRIME, 1e-6)
    assert e.lhs > 0 and e.rhs > 0
    with pytest.raises(InvalidArgument):
        caccioppoli_check(field, p, cfg.omega, cfg.omega, 1e-6)
    with pytest.raises(InvalidArgument):
        caccioppoli_check(field, p, cfg.omega, (0.2, 0.5), 1e-6)


def test_absorption_feasibility(coupled_fixture):
    cfg, field, p = coupled_fixture
    zero = type(field)(field.mesh, field.times, 0 * field.u, 0 * field.v)
    z = lemma_absorption_check(zero, p, 1e-5, cfg)
    assert (z.lhs, z.J_V, z.omega_term) == (0.0, 0.0, 0.0)
    terms = lemma_absorption_check(field, p, 1e-5, cfg)
    assert math.isfinite(terms.feasible_constant(0.1))
    cs = [terms.feasible_constant(e) for e in (0.01, 0.1, 1.0)]
    assert cs[0] >= cs[1] >= cs[2] >= 0
    assert terms.lhs <= 0.1 * terms.J_V + cs[1] * terms.omega_term * (1 + 1e-12)
