"""Both sides of the weighted inequalities, evaluated on discrete fields.

Nothing here proves anything: each check integrates the left- and right-hand
sides with the package quadrature and reports their ratio, so boundedness
in the large parameter ``s`` can be observed over a sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, HypothesisViolated, InvalidArgument, SingularIntegralError
from .evolution import SpaceTimeField
from .operators import Mesh, SystemConfig, weighted_gradient_integral, weighted_integral
from .weights import WeightParams, flush_exp, log_weight

S0_THRESHOLD = 1e-12
S0_TIME_FRACTION = 0.05


# --- data containers ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: Mesh
    times: np.ndarray
    values: np.ndarray

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(self.mesh, self.times, c * self.values)


@dataclass(frozen=True, eq=False)
class SourceField:
    """Source ``f = x**singular_power * regular`` with ``regular`` finite at 0."""

    mesh: Mesh
    times: np.ndarray
    regular: np.ndarray
    singular_power: float = 0.0

    @property
    def values(self) -> np.ndarray:
        x = self.mesh.nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.regular * np.where(x > 0, x, np.nan) ** self.singular_power

    def scaled(self, c: float) -> "SourceField":
        return SourceField(self.mesh, self.times, c * self.regular, self.singular_power)


@dataclass(frozen=True)
class CarlemanSpec:
    params: WeightParams
    s_grid: Tuple[float, ...]
    omega_prime: Tuple[float, float]
    mu1: float = 0.0
    mu2: float = 0.0

    def check(self, alpha1: float, alpha2: float) -> None:
        b = self.params.beta
        for mu, a, name in ((self.mu1, alpha1, "mu1"), (self.mu2, alpha2, "mu2")):
            if mu < max(0.0, 2 + 2 * a - 3 * b):
                raise InvalidArgument(f"{name}={mu} must be >= max(0, 2 + 2 alpha - 3 beta) = {max(0.0, 2 + 2 * a - 3 * b)}")
        if any(np.diff(self.s_grid) <= 0):
            raise InvalidArgument("s_grid must be increasing")


@dataclass(frozen=True)
class RatioEntry:
    """Both sides at one ``s``. When both sides carry a Carleman weight they
    are stored divided by ``exp(log_scale)``; the ratio is unaffected."""

    s: float
    lhs: float
    rhs: float
    variant: str
    log_scale: float = 0.0

    @property
    def ratio(self) -> float:
        if self.lhs == 0.0 and self.rhs == 0.0:
            return 0.0
        if self.rhs == 0.0:
            return float("inf")
        return self.lhs / self.rhs


@dataclass
class RatioReport:
    entries: List[RatioEntry]
    max_ratio: float
    slope: float
    finite: bool
    monotone_increasing: bool
    monotone_decreasing: bool
    s0: Optional[float] = None

    @property
    def bounded(self) -> bool:
        return self.finite and self.slope <= 0.1


def summarize(entries: Sequence[RatioEntry], s0: Optional[float] = None) -> RatioReport:
    """Least-squares slope of log(ratio) against log(s) plus finiteness."""
    entries = list(entries)
    r = np.array([e.ratio for e in entries])
    s = np.array([e.s for e in entries])
    finite = bool(np.all(np.isfinite(r)) and np.all([np.isfinite(e.lhs) and np.isfinite(e.rhs) for e in entries]))
    pos = np.isfinite(r) & (r > 0)
    if pos.sum() >= 2 and np.ptp(np.log(s[pos])) > 0:
        slope = float(np.polyfit(np.log(s[pos]), np.log(r[pos]), 1)[0])
    else:
        slope = 0.0
    d = np.diff(r)
    return RatioReport(
        entries=entries,
        max_ratio=float(np.max(r)) if r.size else 0.0,
        slope=slope,
        finite=finite,
        monotone_increasing=bool(np.all(d >= 0)),
        monotone_decreasing=bool(np.all(d <= 0)),
        s0=s0,
    )


# --- s grid ---------------------------------------------------------------


def empirical_s0(params: WeightParams, mesh: Mesh, candidates=None) -> float:
    """Smallest candidate ``s`` with ``max_x exp(2 s varphi(0.05 T, x)) < 1e-12``."""
    if candidates is None:
        candidates = 10.0 ** np.linspace(-12, 6, 18 * 8 + 1)
    t = np.array([S0_TIME_FRACTION * params.T])
    for s in np.asarray(candidates, dtype=float):
        if np.max(log_weight(params, s, t, mesh.nodes)) < np.log(S0_THRESHOLD):
            return float(s)
    raise DomainError("no candidate s satisfies the s0 criterion")


def s_grid(s0: float, count: int = 8, decades: float = 1.0) -> Tuple[float, ...]:
    return tuple(float(v) for v in s0 * 10.0 ** np.linspace(0.0, decades, count))


# --- Hardy-Poincare -------------------------------------------------------


@dataclass(frozen=True)
class HardyResult:
    gamma: float
    lhs: float
    rhs_integral: float
    c_gamma: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs_integral if self.rhs_integral > 0 else 0.0


def hardy_constant(gamma: float) -> float:
    return 4.0 / (1.0 - gamma) ** 2


def hardy_ratio(gamma: float, v, mesh: Mesh, tol: float = 1e-3) -> HardyResult:
    """Evaluate ``int x^(gamma-2) v^2`` and ``int x^gamma v_x^2``."""
    if not gamma < 1:
        raise DomainError(f"gamma must be < 1, got {gamma!r}")
    v = np.asarray(v, dtype=float)
    if v[0] != 0.0:
        raise InvalidArgument("v must vanish at x = 0")
    lhs = float(weighted_integral(mesh, gamma - 2.0, v**2, vanishes_at_zero=True))
    rhs = float(weighted_gradient_integral(mesh, gamma, v, vanishes_at_zero=True))
    if not np.isfinite(rhs):
        raise SingularIntegralError("int x^gamma v_x^2 diverges")
    c = hardy_constant(gamma)
    return HardyResult(gamma, lhs, rhs, c, bool(lhs <= c * rhs * (1.0 + tol)))


# --- manufactured solutions ----------------------------------------------


PROFILES = ("poly", "decay", "sine")


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    profile: str
    alpha: float
    T: float
    y: ScalarField
    f: SourceField


def _profile_poly(t, x, a, T):
    y = t * (T - t) * x * (1 - x)
    reg = (T - 2 * t) * x ** (2 - a) * (1 - x) - t * (T - t) * (a * (1 - 2 * x) - 2 * x)
    return y, reg, a - 1.0


def _profile_decay(t, x, a, T):
    m = 1.0 - a / 2.0
    e = np.exp(-t)
    y = e * x**m * (1 - x)
    reg = -e * (x ** (2 - a) * (1 - x) + m * a / 2.0 - (m + 1.0) * (1.0 + a / 2.0) * x)
    return y, reg, a / 2.0 - 1.0


def _profile_sine(t, x, a, T):
    w = t**2 * (T - t) ** 2
    y = w * np.sin(np.pi * x)
    reg = 2 * t * (T - t) * (T - 2 * t) * x ** (1 - a) * np.sin(np.pi * x) - w * (
        a * np.pi * np.cos(np.pi * x) - np.pi**2 * x * np.sin(np.pi * x)
    )
    return y, reg, a - 1.0


_PROFILE_FUNCS: Dict[str, Callable] = {"poly": _profile_poly, "decay": _profile_decay, "sine": _profile_sine}


def manufacture_solution(profile: str, alpha: float, T: float, mesh: Mesh, times) -> ManufacturedSolution:
    """Sample ``y`` and ``f = y_t - (x^alpha y_x)_x`` on the grid.

    Profiles: ``poly`` t(T-t)x(1-x), ``decay`` e^-t x^(1-alpha/2)(1-x),
    ``sine`` t^2(T-t)^2 sin(pi x). The source is returned in factored form
    because it blows up like a negative power of x at 0.
    """
    if profile not in _PROFILE_FUNCS:
        raise InvalidArgument(f"unknown profile {profile!r}; choose from {PROFILES}")
    times = np.asarray(times, dtype=float)
    t = times[:, None]
    x = mesh.nodes[None, :]
    y, reg, power = _PROFILE_FUNCS[profile](t, x, alpha, T)
    y = np.array(y, dtype=float)
    y[:, 0] = 0.0
    y[:, -1] = 0.0
    return ManufacturedSolution(
        profile, alpha, T, ScalarField(mesh, times, y), SourceField(mesh, times, np.array(reg, dtype=float), power)
    )


# --- integration helpers -------------------------------------------------


def _trapezoid_weights(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    h = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _st_state(mesh, times, p, values, weight, interval=None):
    """int_0^T int x^p values * weight dx dt."""
    per_t = weighted_integral(mesh, p, values * weight, interval=interval)
    return float(_trapezoid_weights(times) @ per_t)


def _st_gradient(mesh, times, p, values, cell_weight, interval=None):
    per_t = weighted_gradient_integral(mesh, p, values, cell_factor=cell_weight, interval=interval)
    return float(_trapezoid_weights(times) @ per_t)


def peak_log_weight(params: WeightParams, s: float, mesh: Mesh, times) -> float:
    """Largest ``2 s varphi`` or ``2 s Phi`` on the grid.

    Dividing both sides of an estimate by ``exp`` of this keeps the weights
    representable for large ``s`` without changing any ratio.
    """
    x = mesh.nodes
    return float(max(np.max(log_weight(params, s, times, x)), np.max(log_weight(params, s, times, x, 0.0, "Phi"))))


def _weight(params, s, times, x, power=0.0, kind="varphi", shift=0.0):
    return flush_exp(log_weight(params, s, times, x, power, kind) - shift)


def _source_term(params, s, f: SourceField, kind, shift=0.0):
    w = _weight(params, s, f.times, f.mesh.nodes, 0.0, kind, shift)
    return _st_state(f.mesh, f.times, 2.0 * f.singular_power, f.regular**2, w)


def boundary_derivative(mesh: Mesh, values) -> np.ndarray:
    """One-sided second-order ``g_x`` at x = 1 on a nonuniform mesh."""
    x = mesh.nodes
    h1 = x[-1] - x[-2]
    h2 = x[-2] - x[-3]
    g = np.asarray(values)
    return (
        g[..., -1] * (2 * h1 + h2) / (h1 * (h1 + h2))
        - g[..., -2] * (h1 + h2) / (h1 * h2)
        + g[..., -3] * h1 / (h2 * (h1 + h2))
    )


def _degenerate_lhs(params, s, mesh, times, values, alpha, grad_power=None, state_power=None, shift=0.0):
    """int int (s Th x^gp y_x^2 + s^3 Th^3 x^sp y^2) e^{2 s varphi}."""
    b = params.beta
    gp = 2 * alpha - b if grad_power is None else grad_power
    sp_ = 2 + 2 * alpha - 3 * b if state_power is None else state_power
    wg = s * _weight(params, s, times, mesh.face_points, 1.0, shift=shift)
    ws = s**3 * _weight(params, s, times, mesh.nodes, 3.0, shift=shift)
    return _st_gradient(mesh, times, gp, values, wg) + _st_state(mesh, times, sp_, values**2, ws)


# --- single equation -----------------------------------------------------

SINGLE_VARIANTS = ("full-boundary", "localized")


def carleman_single(
    y: ScalarField,
    f: SourceField,
    params: WeightParams,
    s: float,
    variant: str = "full-boundary",
    *,
    alpha: float,
    omega_prime: Optional[Tuple[float, float]] = None,
) -> RatioEntry:
    """Single degenerate equation with source ``f``.

    ``full-boundary``: rhs = int int f^2 e^{2s varphi} + int s Th y_x(t,1)^2 e^{2s varphi(t,1)}.
    ``localized``: rhs = int int f^2 e^{2s Phi} + int int_{omega'} s^3 phi~^3 y^2 e^{2s Phi}.
    """
    if not alpha <= params.beta < 1:
        raise InvalidArgument(f"beta={params.beta} must lie in [alpha, 1) = [{alpha}, 1)")
    if variant not in SINGLE_VARIANTS:
        raise InvalidArgument(f"variant must be one of {SINGLE_VARIANTS}")
    mesh, times = y.mesh, y.times
    shift = peak_log_weight(params, s, mesh, times)
    lhs = _degenerate_lhs(params, s, mesh, times, y.values, alpha, shift=shift)
    if variant == "full-boundary":
        src = _source_term(params, s, f, "varphi", shift)
        yx1 = boundary_derivative(mesh, y.values)
        wb = s * _weight(params, s, times, np.array([1.0]), 1.0, shift=shift)[:, 0]
        rhs = src + float(_trapezoid_weights(times) @ (wb * yx1**2))
    else:
        if omega_prime is None:
            raise InvalidArgument("the localized variant needs omega_prime")
        src = _source_term(params, s, f, "Phi", shift)
        x = mesh.nodes
        tilde3 = np.exp(3 * params.rho * params.sigma(x))[None, :]
        obs_w = s**3 * tilde3 * _weight(params, s, times, x, 3.0, "Phi", shift)
        rhs = src + _st_state(mesh, times, 0.0, y.values**2, obs_w, interval=omega_prime)
    return RatioEntry(float(s), float(lhs), float(rhs), variant, shift)


# --- coupled system ------------------------------------------------------

COUPLED_VARIANTS = ("two-observation", "two-observation-mu", "one-force", "one-force-mu")


def coupling_bound(config: SystemConfig) -> float:
    """Signed ``mu`` with ``b21 >= mu > 0`` (or ``b21 <= mu < 0``) on omega1; 0 if neither."""
    if config.omega1 is None:
        return 0.0
    lo = config.b21.lower_bound_on(config.omega1)
    hi = config.b21.upper_bound_on(config.omega1)
    if lo > 0:
        return lo
    if hi < 0:
        return hi
    return 0.0


def require_one_force_hypothesis(config: SystemConfig) -> float:
    mu = coupling_bound(config)
    if mu == 0.0:
        raise HypothesisViolated(
            "b21 must be bounded away from zero (b21 >= mu > 0 or b21 <= -mu < 0) on omega1 inside omega"
        )
    return mu


def _coupled_lhs(field: SpaceTimeField, params, s, config, mu=None, shift=0.0):
    a1, a2 = config.alpha1, config.alpha2
    m, t = field.mesh, field.times
    if mu is None:
        return _degenerate_lhs(params, s, m, t, field.u, a1, shift=shift) + _degenerate_lhs(
            params, s, m, t, field.v, a2, shift=shift
        )
    return _degenerate_lhs(params, s, m, t, field.u, a1, a1, mu[0], shift) + _degenerate_lhs(
        params, s, m, t, field.v, a2, a2, mu[1], shift
    )


def carleman_coupled(
    field: SpaceTimeField,
    params: WeightParams,
    s: float,
    variant: str,
    config: SystemConfig,
    omega_prime: Tuple[float, float],
    mu: Tuple[float, float] = (0.0, 0.0),
) -> RatioEntry:
    """Coupled adjoint estimates.

    ``two-observation``: rhs = int int_{omega'} s^3 Th^3 (U^2 + V^2) e^{2s Phi}.
    ``one-force``: rhs = int int_omega U^2, requires the b21 sign hypothesis.
    The ``-mu`` variants weight the left side with x^alpha_i U_x^2 and x^mu_i U^2.
    """
    if variant not in COUPLED_VARIANTS:
        raise InvalidArgument(f"variant must be one of {COUPLED_VARIANTS}")
    if not max(config.alpha1, config.alpha2) <= params.beta < 1:
        raise InvalidArgument("beta must lie in [max(alpha1, alpha2), 1)")
    mesh, times = field.mesh, field.times
    use_mu = variant.endswith("-mu")
    if use_mu:
        CarlemanSpec(params, (s,), omega_prime, *mu).check(config.alpha1, config.alpha2)
    one_force = variant.startswith("one-force")
    if one_force:
        require_one_force_hypothesis(config)
    # the one-force right side is unweighted, so no common scale can be taken out
    shift = 0.0 if one_force else peak_log_weight(params, s, mesh, times)
    lhs = _coupled_lhs(field, params, s, config, mu if use_mu else None, shift)
    if one_force:
        rhs = _st_state(mesh, times, 0.0, field.u**2, 1.0, interval=config.omega)
    else:
        w = s**3 * _weight(params, s, times, mesh.nodes, 3.0, "Phi", shift)
        rhs = _st_state(mesh, times, 0.0, field.u**2 + field.v**2, w, interval=omega_prime)
    return RatioEntry(float(s), float(lhs), float(rhs), variant, shift)


def caccioppoli_check(
    field: SpaceTimeField,
    params: WeightParams,
    omega: Tuple[float, float],
    omega_prime: Tuple[float, float],
    s: float,
) -> RatioEntry:
    """lhs = int int_{omega'} (U_x^2 + V_x^2) e^{2s varphi}, rhs = int int_omega (U^2 + V^2) e^{2s varphi}."""
    if not (omega[0] <= omega_prime[0] < omega_prime[1] <= omega[1]) or omega_prime == tuple(omega):
        raise InvalidArgument(f"omega'={omega_prime} must be a proper sub-interval of omega={omega}")
    mesh, times = field.mesh, field.times
    shift = peak_log_weight(params, s, mesh, times)
    wc = _weight(params, s, times, mesh.face_points, shift=shift)
    lhs = _st_gradient(mesh, times, 0.0, field.u, wc, omega_prime) + _st_gradient(
        mesh, times, 0.0, field.v, wc, omega_prime
    )
    wn = _weight(params, s, times, mesh.nodes, shift=shift)
    rhs = _st_state(mesh, times, 0.0, field.u**2 + field.v**2, wn, interval=omega)
    return RatioEntry(float(s), float(lhs), float(rhs), "caccioppoli", shift)


@dataclass(frozen=True)
class AbsorptionTerms:
    lhs: float
    J_V: float
    omega_term: float

    def feasible_constant(self, epsilon: float) -> float:
        """Smallest C_eps with lhs <= eps J(V) + C_eps * omega_term."""
        excess = self.lhs - epsilon * self.J_V
        if excess <= 0:
            return 0.0
        if self.omega_term == 0:
            return float("inf")
        return excess / self.omega_term


def lemma_absorption_check(
    field: SpaceTimeField, params: WeightParams, s: float, config: SystemConfig
) -> AbsorptionTerms:
    """``int int_{omega1} s^3 Th^3 V^2 e^{2s Phi}``, ``J(V)`` and ``int int_omega U^2``."""
    require_one_force_hypothesis(config)
    mesh, times = field.mesh, field.times
    w = s**3 * _weight(params, s, times, mesh.nodes, 3.0, "Phi")
    lhs = _st_state(mesh, times, 0.0, field.v**2, w, interval=config.omega1)
    J = _degenerate_lhs(params, s, mesh, times, field.v, config.alpha2)
    om = _st_state(mesh, times, 0.0, field.u**2, 1.0, interval=config.omega)
    return AbsorptionTerms(float(lhs), float(J), float(om))


def sweep_s(fn: Callable[[float], RatioEntry], grid: Sequence[float], s0: Optional[float] = None) -> RatioReport:
    return summarize([fn(s) for s in grid], s0)
