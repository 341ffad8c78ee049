"""Graded meshes, the degenerate diffusion operator and weighted quadrature.

The discrete operator is the flux form

    (A u)_i = [ f_{i+1/2} (u_{i+1}-u_i)/h_{i+1/2} - f_{i-1/2} (u_i-u_{i-1})/h_{i-1/2} ] / w_i

with face coefficient ``f = x_face**alpha`` and lumped node weights ``w``.
``W A`` is the symmetric stiffness matrix, so ``A`` is self-adjoint in the
``w``-weighted inner product, which every solver in the package uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidArgument, SingularIntegralError

Interval = Tuple[float, float]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    grading_exponent: float
    face_points: np.ndarray = field(init=False)
    cell_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        x = _frozen(self.nodes)
        if x.ndim != 1 or x.size < 5:
            raise InvalidArgument("mesh needs at least 5 nodes")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise InvalidArgument("nodes must increase strictly from 0 to 1")
        h = np.diff(x)
        w = np.empty_like(x)
        w[0] = h[0] / 2
        w[-1] = h[-1] / 2
        w[1:-1] = (h[:-1] + h[1:]) / 2
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "face_points", _frozen(0.5 * (x[:-1] + x[1:])))
        object.__setattr__(self, "cell_weights", _frozen(w))

    @property
    def n(self) -> int:
        """Number of cells (nodes - 1)."""
        return self.nodes.size - 1

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def inner(self, a, b) -> float:
        """Lumped L2 inner product of nodal grid functions (last axis)."""
        return np.sum(self.cell_weights * np.asarray(a) * np.asarray(b), axis=-1)

    def norm(self, a):
        return np.sqrt(self.inner(a, a))


def build_mesh(n: int, grading_exponent: float = 2.0) -> Mesh:
    """Mesh with nodes ``(i/n)**grading_exponent``, clustered toward x = 0."""
    if int(n) != n or n < 4:
        raise InvalidArgument(f"n must be an integer >= 4, got {n!r}")
    if not grading_exponent >= 1:
        raise InvalidArgument(f"grading exponent must be >= 1, got {grading_exponent!r}")
    n = int(n)
    x = (np.arange(n + 1) / n) ** grading_exponent
    x[0], x[-1] = 0.0, 1.0
    return Mesh(x, float(grading_exponent))


def _check_interval(iv, name, closed=True) -> Interval:
    a, b = float(iv[0]), float(iv[1])
    ok = (0.0 <= a < b <= 1.0) if closed else (0.0 < a < b < 1.0)
    if not ok:
        raise InvalidArgument(f"{name}={iv!r} is not a sub-interval of [0, 1]")
    return (a, b)


@dataclass(frozen=True)
class CoefficientSpec:
    """Constant ``value``, optionally restricted to the open interval ``support``."""

    value: float = 0.0
    support: Optional[Interval] = None

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.support is not None:
            object.__setattr__(self, "support", _check_interval(self.support, "support"))

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.support is None:
            return np.full(x.shape, self.value)
        a, b = self.support
        return np.where((x > a) & (x < b), self.value, 0.0)

    def lower_bound_on(self, interval: Interval) -> float:
        """inf of the coefficient over the open ``interval``."""
        if self.support is None:
            return self.value
        a, b = self.support
        if a <= interval[0] and interval[1] <= b:
            return self.value
        return min(self.value, 0.0)

    def upper_bound_on(self, interval: Interval) -> float:
        if self.support is None:
            return self.value
        a, b = self.support
        if a <= interval[0] and interval[1] <= b:
            return self.value
        return max(self.value, 0.0)


def _coef(c) -> CoefficientSpec:
    if isinstance(c, CoefficientSpec):
        return c
    if isinstance(c, (int, float)):
        return CoefficientSpec(float(c))
    return CoefficientSpec(*c)


@dataclass(frozen=True)
class SystemConfig:
    alpha1: float
    alpha2: float
    T: float
    omega: Interval = (0.3, 0.8)
    omega1: Optional[Interval] = None
    b11: CoefficientSpec = CoefficientSpec()
    b12: CoefficientSpec = CoefficientSpec()
    b21: CoefficientSpec = CoefficientSpec()
    b22: CoefficientSpec = CoefficientSpec()
    nx: int = 60
    nt: int = 120
    theta_scheme: float = 1.0
    grading: float = 2.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            a = getattr(self, name)
            if not 0.0 < a < 1.0:
                raise InvalidArgument(f"{name} must lie in (0, 1) (weak degeneracy), got {a!r}")
        if not self.T > 0:
            raise InvalidArgument(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "omega", _check_interval(self.omega, "omega"))
        if self.omega1 is not None:
            w1 = _check_interval(self.omega1, "omega1")
            if not (self.omega[0] < w1[0] and w1[1] < self.omega[1]):
                raise InvalidArgument(f"omega1={w1} must lie strictly inside omega={self.omega}")
            object.__setattr__(self, "omega1", w1)
        for name in ("b11", "b12", "b21", "b22"):
            object.__setattr__(self, name, _coef(getattr(self, name)))
        if int(self.nx) != self.nx or self.nx < 4:
            raise InvalidArgument(f"nx must be an integer >= 4, got {self.nx!r}")
        if int(self.nt) != self.nt or self.nt < 1:
            raise InvalidArgument(f"nt must be a positive integer, got {self.nt!r}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "nt", int(self.nt))
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise InvalidArgument(f"theta_scheme must lie in [1/2, 1], got {self.theta_scheme!r}")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    def mesh(self) -> Mesh:
        return build_mesh(self.nx, self.grading)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Tridiagonal bands of ``u -> (x^alpha u_x)_x`` on the interior nodes.

    ``lower[i]`` multiplies ``u_{i-1}`` in row ``i`` (``lower[0] == 0``) and
    ``upper[i]`` multiplies ``u_{i+1}`` (``upper[-1] == 0``).
    """

    mesh: Mesh
    alpha: float
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def to_sparse(self):
        n = self.size
        return sp.diags([self.lower[1:], self.diag, self.upper[:-1]], [-1, 0, 1], shape=(n, n), format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def stiffness(self) -> np.ndarray:
        """Dense ``W A`` (symmetric, negative definite)."""
        return self.mesh.cell_weights[1:-1, None] * self.to_dense()

    def apply(self, u) -> np.ndarray:
        """Apply to a full nodal vector (boundary values ignored); returns a full vector."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        ui = u[..., 1:-1]
        out[..., 1:-1] = self.diag * ui
        out[..., 2:-1] += self.lower[1:] * ui[..., :-1]
        out[..., 1:-2] += self.upper[:-1] * ui[..., 1:]
        return out

    def energy(self, u) -> np.ndarray:
        """Discrete ``int x^alpha u_x^2`` = -<A u, u>_w for full nodal vectors."""
        u = np.asarray(u, dtype=float)
        flux = self.mesh.face_points ** self.alpha / self.mesh.spacing
        return np.sum(flux * np.diff(u, axis=-1) ** 2, axis=-1)


def assemble_diffusion(mesh: Mesh, alpha: float) -> DiscreteOperator:
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument(f"alpha must lie in (0, 1); got {alpha!r} (alpha >= 1 is not supported)")
    h = mesh.spacing
    flux = mesh.face_points ** alpha / h
    w = mesh.cell_weights[1:-1]
    left = flux[:-1] / w
    right = flux[1:] / w
    lower = left.copy()
    lower[0] = 0.0
    upper = right.copy()
    upper[-1] = 0.0
    return DiscreteOperator(mesh, float(alpha), _frozen(lower), _frozen(-(left + right)), _frozen(upper))


def coupling_values(mesh: Mesh, config: SystemConfig, adjoint: bool = False) -> np.ndarray:
    """Nodal coupling matrices ``B`` at interior nodes, shape ``(n, 2, 2)``.

    The adjoint (w-transpose) swaps ``b12`` and ``b21``.
    """
    x = mesh.interior
    b = np.empty((x.size, 2, 2))
    b[:, 0, 0] = config.b11.at(x)
    b[:, 1, 1] = config.b22.at(x)
    b12 = config.b12.at(x)
    b21 = config.b21.at(x)
    b[:, 0, 1] = b21 if adjoint else b12
    b[:, 1, 0] = b12 if adjoint else b21
    return b


def coupled_blocks(mesh: Mesh, config: SystemConfig, adjoint: bool = False):
    """Interleaved block bands ``(lo, di, up)`` of ``diag(A1, A2) - B``."""
    a1 = assemble_diffusion(mesh, config.alpha1)
    a2 = assemble_diffusion(mesh, config.alpha2)
    n = a1.size
    lo = np.zeros((n, 2, 2))
    up = np.zeros((n, 2, 2))
    lo[:, 0, 0], lo[:, 1, 1] = a1.lower, a2.lower
    up[:, 0, 0], up[:, 1, 1] = a1.upper, a2.upper
    di = -coupling_values(mesh, config, adjoint)
    di[:, 0, 0] += a1.diag
    di[:, 1, 1] += a2.diag
    return lo, di, up


def assemble_coupled(mesh: Mesh, config: SystemConfig, t: float = 0.0):
    """Sparse ``2(N-1)`` square matrix ``[[A1 - b11, -b12], [-b21, A2 - b22]]``.

    Unknowns are stacked as all interior u values followed by all interior v
    values. Coefficients are time independent; ``t`` is only range-checked.
    """
    if not 0.0 <= t <= config.T:
        raise DomainError(f"t={t!r} outside [0, {config.T}]")
    a1 = assemble_diffusion(mesh, config.alpha1).to_sparse()
    a2 = assemble_diffusion(mesh, config.alpha2).to_sparse()
    b = coupling_values(mesh, config)
    return sp.bmat(
        [[a1 - sp.diags(b[:, 0, 0]), sp.diags(-b[:, 0, 1])], [sp.diags(-b[:, 1, 0]), a2 - sp.diags(b[:, 1, 1])]],
        format="csr",
    )


# --- quadrature ---------------------------------------------------------


def _power_moment(p, c, d):
    """int_c^d x^p dx for 0 <= c < d (c > 0 unless p > -1)."""
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    q = p + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if q == 0.0:
            return np.log(d / c)
        pos = c > 0
        ratio = np.log(np.where(pos, d / np.where(pos, c, 1.0), 1.0))
        near = np.where(pos, c**q * np.expm1(q * ratio) / q, 0.0)
        return np.where(pos, near, d**q / q)


def _panel_weights(mesh: Mesh, p: float, interval: Optional[Interval]):
    """Linear-interpolant product weights ``(w_left, w_right)`` per panel,
    excluding panel 0; plus the clipped extent of panel 0."""
    x = mesh.nodes
    lo, hi = (0.0, 1.0) if interval is None else interval
    c = np.clip(x[:-1], lo, hi)
    d = np.clip(x[1:], lo, hi)
    h = np.diff(x)
    active = d > c
    wl = np.zeros(mesh.n)
    wr = np.zeros(mesh.n)
    idx = np.nonzero(active)[0]
    idx = idx[idx > 0]
    if idx.size:
        ci, di, xi, hi_ = c[idx], d[idx], x[idx], h[idx]
        m0 = _power_moment(p, ci, di)
        m1 = _power_moment(p + 1.0, ci, di)
        shifted = m1 - xi * m0  # int x^p (x - x_i)
        wr[idx] = shifted / hi_
        wl[idx] = m0 - wr[idx]
    return wl, wr, (c[0], d[0]) if active[0] else None


def quadrature_weights(mesh: Mesh, p: float, interval: Optional[Interval] = None) -> np.ndarray:
    """Nodal weights ``q`` with ``values @ q`` = product-integration of
    ``x^p * (linear interpolant)`` over ``interval``; requires p > -1."""
    if p <= -1:
        raise SingularIntegralError(f"exponent p={p} is not integrable at 0 for general data")
    wl, wr, first = _panel_weights(mesh, p, interval)
    q = np.zeros(mesh.n + 1)
    q[:-1] += wl
    q[1:] += wr
    if first is not None:
        c, d = first
        x1 = mesh.nodes[1]
        m0 = _power_moment(p, c, d)
        r = _power_moment(p + 1.0, c, d) / x1
        q[0] += m0 - r
        q[1] += r
    return q


def _first_panel(mesh, p, g, extent, vanishes_at_zero):
    c, d = extent
    x1, x2 = mesh.nodes[1], mesh.nodes[2]
    g0, g1, g2 = g[..., 0], g[..., 1], g[..., 2]
    if vanishes_at_zero:
        # power-law model g ~ g1 (x/x1)^r fitted through nodes 1 and 2
        with np.errstate(divide="ignore", invalid="ignore"):
            same_sign = (g1 != 0) & (g2 / g1 > 0)
            r = np.where(same_sign, np.log(np.abs(g2 / np.where(g1 == 0, 1.0, g1))) / np.log(x2 / x1), 1.0)
        e = p + r + 1.0
        if np.any(same_sign & (e <= 0)):
            raise SingularIntegralError(f"power-law model x^{p}*x^r near 0 is not integrable (p + r <= -1)")
        if np.any(~same_sign & (g1 != 0)) and p <= -2:
            raise SingularIntegralError(f"cannot model data near 0 for exponent p={p}")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            e_safe = np.where(e > 0, e, 1.0)
            val = np.where(
                same_sign,
                g1 * np.exp(-r * np.log(x1)) * (d**e_safe - c**e_safe) / e_safe,
                g1 * _power_moment(p + 1.0, c, d) / x1 if p > -2 else 0.0,
            )
        return np.where(g1 == 0, 0.0, val)
    if p > -1:
        m0 = _power_moment(p, c, d)
        r = _power_moment(p + 1.0, c, d) / x1
        return g0 * (m0 - r) + g1 * r
    if np.any(g0 != 0):
        raise SingularIntegralError(f"integral of x^{p} g(x) diverges at 0 with g(0) != 0")
    if p <= -2 and np.any(g1 != 0):
        raise SingularIntegralError(
            f"x^{p} times a linear interpolant diverges at 0; pass vanishes_at_zero=True for power-law data"
        )
    return g1 * _power_moment(p + 1.0, c, d) / x1


def weighted_integral(mesh: Mesh, p: float, values, interval: Optional[Interval] = None, vanishes_at_zero: bool = False):
    """Approximate ``int x^p g(x) dx`` over ``interval`` (default [0, 1]).

    Each panel integrates ``x^p`` times the linear interpolant of ``g``
    exactly. On the first panel, ``vanishes_at_zero=True`` replaces the
    interpolant by a power law fitted through nodes 1 and 2, which is exact
    for monomial data and admits exponents ``p <= -1``. Leading axes of
    ``values`` are batched.
    """
    g = np.asarray(values, dtype=float)
    if g.shape[-1] != mesh.n + 1:
        raise InvalidArgument("values must have one entry per mesh node")
    if not np.all(np.isfinite(g)):
        raise InvalidArgument("values must be finite")
    if interval is not None:
        interval = _check_interval(interval, "interval")
    wl, wr, first = _panel_weights(mesh, p, interval)
    total = g[..., :-1] @ wl + g[..., 1:] @ wr
    if first is not None:
        total = total + _first_panel(mesh, p, g, first, vanishes_at_zero)
    return total


def weighted_gradient_integral(
    mesh: Mesh,
    p: float,
    values,
    cell_factor=None,
    interval: Optional[Interval] = None,
    vanishes_at_zero: bool = False,
):
    """Approximate ``int x^p c(x) g_x(x)^2 dx`` with ``g_x`` constant per cell.

    ``cell_factor`` holds one multiplier per cell (broadcast over leading
    axes). For ``p <= -1`` the first cell needs ``vanishes_at_zero`` and
    is integrated against the power-law model of ``g``.
    """
    g = np.asarray(values, dtype=float)
    x = mesh.nodes
    lo, hi = (0.0, 1.0) if interval is None else _check_interval(interval, "interval")
    c = np.clip(x[:-1], lo, hi)
    d = np.clip(x[1:], lo, hi)
    active = d > c
    slope2 = (np.diff(g, axis=-1) / mesh.spacing) ** 2
    if cell_factor is not None:
        slope2 = slope2 * cell_factor
    m = np.zeros(mesh.n)
    rest = np.nonzero(active)[0]
    rest = rest[rest > 0]
    m[rest] = _power_moment(p, c[rest], d[rest])
    total = slope2 @ m
    if active[0]:
        if p > -1:
            total = total + slope2[..., 0] * _power_moment(p, c[0], d[0])
        elif vanishes_at_zero:
            x1, x2 = x[1], x[2]
            g1, g2 = g[..., 1], g[..., 2]
            with np.errstate(divide="ignore", invalid="ignore"):
                ok = (g1 != 0) & (g2 / g1 > 0)
                r = np.where(ok, np.log(np.abs(g2 / np.where(g1 == 0, 1.0, g1))) / np.log(x2 / x1), 1.0)
            e = p + 2 * r - 1.0
            if np.any((g1 != 0) & ((e <= 0) | ~ok)):
                raise SingularIntegralError(f"int x^{p} g_x^2 diverges at 0 for the fitted power law")
            factor = 1.0 if cell_factor is None else np.asarray(cell_factor)[..., 0]
            e_safe = np.where(e > 0, e, 1.0)
            with np.errstate(over="ignore", invalid="ignore"):
                first = (g1 * r) ** 2 * np.exp(-2 * r * np.log(x1)) * (d[0] ** e_safe - c[0] ** e_safe) / e_safe
            total = total + np.where(g1 == 0, 0.0, first) * factor
        elif np.any(slope2[..., 0] != 0):
            raise SingularIntegralError(f"int x^{p} g_x^2 diverges on the first cell")
    return total
