"""Carleman weight functions and their admissibility checks.

    Theta(t) = 1 / (t^k (T - t)^k)
    psi(x)   = lam (x^(2 - beta) - d)          varphi = Theta psi
    Psi(x)   = exp(rho sigma(x)) - exp(2 rho |sigma|_inf)   Phi = Theta Psi
    phi~     = exp(rho sigma(x)) Theta

``sigma`` is a polynomial bump on ``[a', 1]`` extended by zero to ``[0, a']``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DomainError, InvalidArgument, UnsupportedParameter

LOG_FLUSH = -690.0  # exp() below this is flushed to zero


@dataclass(frozen=True)
class SigmaFunction:
    a_prime: float
    p: float
    q: float
    normalizer: float
    critical_point: float
    omega0: Tuple[float, float]

    sup_norm = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.a_prime) & (x < 1.0)
        xs = np.where(inside, x, 0.5 * (self.a_prime + 1.0))
        val = (xs - self.a_prime) ** self.p * (1.0 - xs) ** self.q / self.normalizer
        return np.where(inside, val, 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.a_prime) & (x < 1.0)
        xs = np.where(inside, x, 0.5 * (self.a_prime + 1.0))
        val = (
            (xs - self.a_prime) ** (self.p - 1)
            * (1.0 - xs) ** (self.q - 1)
            * (self.p * (1.0 - xs) - self.q * (xs - self.a_prime))
            / self.normalizer
        )
        return np.where(inside, val, 0.0)


def build_sigma(a_prime: float, target_critical_point: float, omega0=None) -> SigmaFunction:
    """Bump ``(x - a')^p (1 - x)^q / M`` with its only critical point at the target."""
    a, xc = float(a_prime), float(target_critical_point)
    if not 0.0 <= a < 1.0:
        raise InvalidArgument(f"a_prime={a_prime!r} must lie in [0, 1)")
    if not a < xc < 1.0:
        raise InvalidArgument(f"critical point {xc!r} must lie in ({a}, 1)")
    if omega0 is None:
        r = 0.25 * min(xc - a, 1.0 - xc)
        omega0 = (xc - r, xc + r)
    omega0 = (float(omega0[0]), float(omega0[1]))
    if not (a < omega0[0] < xc < omega0[1] < 1.0):
        raise InvalidArgument(f"omega0={omega0} must contain {xc} and lie inside ({a}, 1)")
    p = 2.0 * (xc - a) / (1.0 - xc)
    q = 2.0
    if p < 2.0:
        p, q = 2.0, 2.0 * (1.0 - xc) / (xc - a)
    peak = (xc - a) ** p * (1.0 - xc) ** q
    return SigmaFunction(a, p, q, peak, xc, omega0)


@dataclass(frozen=True)
class WeightParams:
    T: float
    beta: float
    sigma: SigmaFunction
    k: int = 4
    d: float = 5.0
    rho: float = 3.0
    lam: Optional[float] = None

    @property
    def lambda_interval(self) -> Tuple[float, float]:
        return lambda_interval(self.d, self.rho, self.sigma.sup_norm)

    @property
    def lam_value(self) -> float:
        if self.lam is not None:
            return self.lam
        lo, hi = self.lambda_interval
        return 0.5 * (lo + hi)


def lambda_interval(d: float, rho: float, sigma_sup: float = 1.0) -> Tuple[float, float]:
    e1 = math.exp(rho * sigma_sup)
    e2 = math.exp(2.0 * rho * sigma_sup)
    return e2 / (d - 1.0), 4.0 / (3.0 * d) * (e2 - e1)


@dataclass
class AdmissibilityReport:
    checks: Dict[str, bool]
    lambda_interval: Tuple[float, float]
    lambda_default: float
    messages: List[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return all(self.checks.values())


def validate_params(params: WeightParams, alphas=None) -> AdmissibilityReport:
    checks: Dict[str, bool] = {}
    msgs: List[str] = []

    def check(name, ok, msg):
        checks[name] = bool(ok)
        if not ok:
            msgs.append(msg)

    check("d", params.d >= 5, f"d >= 5 required, got d={params.d}")
    check("k", int(params.k) == params.k and params.k >= 4, f"integer k >= 4 required, got k={params.k}")
    rho_min = 4.0 * math.log(2.0) / params.sigma.sup_norm
    check("rho", params.rho > rho_min, f"rho > 4 ln2/|sigma|_inf = {rho_min:.6g} required, got rho={params.rho}")
    beta_lo = max(alphas) if alphas is not None else 0.0
    check("beta", beta_lo <= params.beta < 1.0, f"beta in [{beta_lo}, 1) required, got beta={params.beta}")
    lo, hi = lambda_interval(params.d, params.rho, params.sigma.sup_norm)
    check("lambda_interval", lo < hi, f"lambda interval ({lo:.6g}, {hi:.6g}) is empty")
    lam_default = 0.5 * (lo + hi)
    if params.lam is not None:
        check("lambda", lo < params.lam < hi, f"lambda must lie in ({lo:.6g}, {hi:.6g}), got {params.lam}")
    return AdmissibilityReport(checks, (lo, hi), lam_default, msgs)


# --- evaluation ---------------------------------------------------------


def theta(params: WeightParams, t):
    """Theta on [0, T]; +inf at the endpoints."""
    t = np.asarray(t, dtype=float)
    g = t * (params.T - t)
    with np.errstate(divide="ignore"):
        return np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0) ** params.k, np.inf)


def psi(params: WeightParams, x):
    x = np.asarray(x, dtype=float)
    return params.lam_value * (x ** (2.0 - params.beta) - params.d)


def big_psi(params: WeightParams, x):
    s = params.sigma
    return np.exp(params.rho * s(x)) - math.exp(2.0 * params.rho * s.sup_norm)


@dataclass(frozen=True)
class WeightValues:
    theta: np.ndarray
    psi: np.ndarray
    varphi: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    phi_tilde: np.ndarray


def eval_weights(params: WeightParams, t, x) -> WeightValues:
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= params.T)):
        raise DomainError(f"t must lie in (0, {params.T})")
    th = theta(params, t)
    ps = psi(params, x)
    bps = big_psi(params, x)
    return WeightValues(
        theta=th,
        psi=ps,
        varphi=th * ps,
        Psi=bps,
        Phi=th * bps,
        phi_tilde=np.exp(params.rho * params.sigma(x)) * th,
    )


def log_weight(params: WeightParams, s: float, times, x, theta_power: float = 0.0, kind: str = "varphi"):
    """``log(Theta^m) + 2 s w`` on the ``(times, x)`` grid, ``w`` in
    {varphi, Phi}. ``-inf`` at t = 0, T where the weight vanishes."""
    th = theta(params, times)[:, None]
    spatial = psi(params, x) if kind == "varphi" else big_psi(params, x)
    finite = np.isfinite(th)
    ths = np.where(finite, th, 1.0)
    out = theta_power * np.log(ths) + 2.0 * s * ths * np.asarray(spatial)[None, :]
    return np.where(finite, out, -np.inf)


def flush_exp(logw):
    """exp with values below ``exp(LOG_FLUSH)`` set to exactly zero."""
    logw = np.asarray(logw, dtype=float)
    return np.where(logw < LOG_FLUSH, 0.0, np.exp(np.maximum(logw, LOG_FLUSH)))


def carleman_weight(params: WeightParams, s: float, times, x, theta_power: float = 0.0, kind: str = "varphi"):
    """``Theta^m exp(2 s varphi)`` (or with Phi) evaluated in log space."""
    return flush_exp(log_weight(params, s, times, x, theta_power, kind))


@dataclass
class OrderingReport:
    holds: bool
    lower_margin: float  # min of (varphi - 4/3 Phi) / |Phi|
    upper_margin: float  # min of (Phi - varphi) / |Phi|
    worst_lower_x: float
    worst_upper_x: float


def check_phi_ordering(params: WeightParams, mesh, times) -> OrderingReport:
    """Check ``4/3 Phi < varphi < Phi`` at every interior ``(t, x)`` sample."""
    times = np.asarray(times, dtype=float)
    times = times[(times > 0) & (times < params.T)]
    x = np.asarray(mesh.nodes if hasattr(mesh, "nodes") else mesh, dtype=float)
    w = eval_weights(params, times[:, None], x[None, :])
    scale = np.abs(w.Phi)
    low = (w.varphi - 4.0 / 3.0 * w.Phi) / scale
    high = (w.Phi - w.varphi) / scale
    il = np.unravel_index(np.argmin(low), low.shape)
    ih = np.unravel_index(np.argmin(high), high.shape)
    return OrderingReport(
        holds=bool(np.all(low > 0) and np.all(high > 0)),
        lower_margin=float(low[il]),
        upper_margin=float(high[ih]),
        worst_lower_x=float(x[il[1]]),
        worst_upper_x=float(x[ih[1]]),
    )


def comparison_constant(params: WeightParams, s: float, alpha: float, mesh, times) -> Dict[str, float]:
    """Smallest ``c`` on the samples with
    ``Theta x^(2a-b) e^{2 s varphi} <= c phi~ e^{2 s Phi}`` and the cubic
    analogue, for ``x`` in ``[a', 1]``."""
    times = np.asarray(times, dtype=float)
    times = times[(times > 0) & (times < params.T)]
    x = np.asarray(mesh.nodes, dtype=float)
    x = x[(x >= params.sigma.a_prime) & (x > 0)]
    lth = np.log(theta(params, times))[:, None]
    th = np.exp(lth)
    gap = 2.0 * s * th * (psi(params, x) - big_psi(params, x))[None, :]  # log(e^{2s varphi} / e^{2s Phi})
    rho_sigma = params.rho * params.sigma(x)[None, :]
    b = params.beta
    lx = np.log(x)
    r1 = (2 * alpha - b) * lx[None, :] + gap - rho_sigma
    r3 = (2 + 2 * alpha - 3 * b) * lx[None, :] + gap - 3 * rho_sigma
    return {"first_order": float(np.exp(np.max(r1))), "third_order": float(np.exp(np.max(r3)))}


# --- Theta bounds -------------------------------------------------------


@dataclass
class ThetaBounds:
    T: float
    k: int
    c1: float
    c2: float
    c3: float
    c4: Optional[float]
    observed: Dict[str, float]
    ratios: Dict[str, float]

    @property
    def verified(self) -> bool:
        # c1 is attained at T/2, so allow round-off there
        return all(r <= 1.0 + 1e-12 for r in self.ratios.values())


def theta_bound_constants(T: float, k: int, samples: int = 20001) -> ThetaBounds:
    """Declared constants ``c1..c4`` together with their observed optimal
    values on ``t in [0.01 T, 0.99 T]``."""
    if k < 1 or int(k) != k:
        raise UnsupportedParameter(f"k must be an integer >= 1, got {k!r}")
    k = int(k)
    half = T / 2.0
    c1 = (2.0 / T) ** (2 * k)
    c2 = k * T * half ** (2 * (k - 1))
    c3 = k * (k + 1) * T**2 * half ** (4 * (k - 1))
    c4 = k * (k + 1) * T**2 * half ** (k - 4) if k >= 2 else None

    t = np.linspace(0.01 * T, 0.99 * T, samples)
    g = t * (T - t)
    dg = T - 2 * t
    th = g ** (-k)
    dth = -k * th * dg / g
    ddth = th * (k * (k + 1) * dg**2 / g**2 + 2 * k / g)
    observed = {
        "c1": float(np.min(th)),
        "c2": float(np.max(np.abs(dth) / th**2)),
        "c3": float(np.max(np.abs(ddth) / th**3)),
    }
    ratios = {"c1": c1 / observed["c1"], "c2": observed["c2"] / c2, "c3": observed["c3"] / c3}
    if c4 is not None:
        observed["c4"] = float(np.max(np.abs(ddth) / th**2))
        ratios["c4"] = observed["c4"] / c4
    return ThetaBounds(T, k, c1, c2, c3, c4, observed, ratios)
