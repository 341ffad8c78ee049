"""Time stepping of the controlled system and of its adjoint.

The forward problem is

    u_t = (x^a1 u_x)_x - b11 u - b12 v + h 1_omega
    v_t = (x^a2 v_x)_x - b22 v - b21 u

and the adjoint swaps ``b12`` and ``b21``. Both use the same theta-scheme
with the coupling inside one block-tridiagonal solve per step. Since the
adjoint matrix is the w-transpose of the forward one, the discrete control
map and the adjoint trace satisfy the duality identity to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import InvalidArgument, SingularSystemError
from .operators import Mesh, SystemConfig, assemble_diffusion, coupled_blocks


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    mesh: Mesh
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        shape = (self.times.size, self.mesh.n + 1)
        if self.u.shape != shape or self.v.shape != shape:
            raise InvalidArgument(f"field arrays must have shape {shape}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvalidArgument("field contains non-finite values")

    @property
    def final(self):
        return self.u[-1], self.v[-1]

    def norms_sq(self) -> np.ndarray:
        """``||(u, v)(t_n)||^2`` for every time level."""
        return self.mesh.inner(self.u, self.u) + self.mesh.inner(self.v, self.v)


@dataclass(frozen=True)
class EnergyReport:
    sup_norm_sq: float
    gradient_integral: float
    source_norm_sq: float
    initial_norm_sq: float
    bound_ratio: float


def control_mask(mesh: Mesh, config: SystemConfig) -> np.ndarray:
    """Nodal indicator of omega (open interval, boundary nodes excluded)."""
    a, b = config.omega
    x = mesh.nodes
    m = ((x > a) & (x < b)).astype(float)
    m[0] = m[-1] = 0.0
    return m


def control_time_weights(config: SystemConfig) -> np.ndarray:
    """Time weights pairing a level-wise control with its adjoint trace."""
    th = config.theta_scheme
    tau = np.full(config.nt + 1, config.dt)
    tau[0] = config.dt * (1.0 - th)
    tau[-1] = config.dt * th
    return tau


def control_inner(config: SystemConfig, mesh: Mesh, h, g) -> float:
    """Discrete ``int_0^T int_omega h g dx dt``."""
    w = mesh.cell_weights * control_mask(mesh, config)
    return float(np.sum(control_time_weights(config)[:, None] * w * np.asarray(h) * np.asarray(g)))


def _boundary_ok(f, name):
    f = np.asarray(f, dtype=float)
    scale = max(1.0, float(np.max(np.abs(f)))) if f.size else 1.0
    if abs(f[0]) > 1e-12 * scale or abs(f[-1]) > 1e-12 * scale:
        raise InvalidArgument(f"{name} must vanish at x = 0 and x = 1")
    return f


def _pack(u, v):
    return np.ascontiguousarray(np.stack([u[..., 1:-1], v[..., 1:-1]], axis=-1))


def _unpack(states, mesh):
    shape = states.shape[:-2] + (mesh.n + 1,)
    u = np.zeros(shape)
    v = np.zeros(shape)
    u[..., 1:-1] = states[..., 0]
    v[..., 1:-1] = states[..., 1]
    return u, v


def _march(config, mesh, adjoint, x0, forcing):
    lo, di, up = coupled_blocks(mesh, config, adjoint=adjoint)
    states, ok = _kernels.theta_march(lo, di, up, float(config.theta_scheme), config.dt, x0, forcing)
    if not ok or not np.all(np.isfinite(states)):
        raise SingularSystemError(f"implicit step matrix is singular for config {config!r}")
    return states


def _check_initial(mesh, u0, v0, names):
    u0 = _boundary_ok(u0, names[0])
    v0 = _boundary_ok(v0, names[1])
    if u0.shape != (mesh.n + 1,) or v0.shape != (mesh.n + 1,):
        raise InvalidArgument(f"initial data must have {mesh.n + 1} nodal values")
    return _pack(u0, v0)


def solve_forward(config: SystemConfig, u0, v0, h=None) -> SpaceTimeField:
    """Theta-scheme solution of the controlled system from ``(u0, v0)``.

    ``h`` has one row per time level and must vanish outside omega; the
    source entering step ``n-1 -> n`` is ``dt*(theta h^n + (1-theta) h^{n-1})``.
    """
    mesh = config.mesh()
    x0 = _check_initial(mesh, u0, v0, ("u0", "v0"))
    forcing = np.zeros((config.nt + 1,) + x0.shape)
    if h is not None:
        h = np.asarray(h, dtype=float)
        if h.shape != (config.nt + 1, mesh.n + 1):
            raise InvalidArgument(f"control must have shape {(config.nt + 1, mesh.n + 1)}")
        mask = control_mask(mesh, config)
        outside = np.abs(h * (1.0 - mask))
        if np.any(outside > 1e-14 * max(1.0, float(np.max(np.abs(h))))):
            raise InvalidArgument("control must vanish outside omega")
        g = (h * mask)[:, 1:-1]
        th = config.theta_scheme
        forcing[1:, :, 0] = config.dt * (th * g[1:] + (1.0 - th) * g[:-1])
    states = _march(config, mesh, False, x0, forcing)
    u, v = _unpack(states, mesh)
    return SpaceTimeField(mesh, config.times(), u, v)


def solve_adjoint_forward(config: SystemConfig, U0, V0) -> SpaceTimeField:
    """Adjoint system marched forward from ``(U0, V0)`` at t = 0."""
    mesh = config.mesh()
    x0 = _check_initial(mesh, U0, V0, ("U0", "V0"))
    forcing = np.zeros((config.nt + 1,) + x0.shape)
    states = _march(config, mesh, True, x0, forcing)
    u, v = _unpack(states, mesh)
    return SpaceTimeField(mesh, config.times(), u, v)


def solve_adjoint_backward(config: SystemConfig, pT, qT) -> SpaceTimeField:
    """Adjoint system with final data at t = T, i.e. the forward adjoint in
    reversed time. Level ``n`` of the result is the state at ``t_n``."""
    f = solve_adjoint_forward(config, pT, qT)
    return SpaceTimeField(f.mesh, f.times, f.u[::-1].copy(), f.v[::-1].copy())


def adjoint_control_trace(config: SystemConfig, backward: SpaceTimeField):
    """Level-wise adjoint values ``(p~, q~)`` that pair exactly with a
    level-wise control under :func:`control_time_weights`.

    For backward Euler this is the adjoint shifted by one level.
    """
    th = config.theta_scheme
    mesh = backward.mesh
    if th == 1.0:
        p = np.empty_like(backward.u)
        q = np.empty_like(backward.v)
        p[1:], q[1:] = backward.u[:-1], backward.v[:-1]
        p[0], q[0] = backward.u[0], backward.v[0]
        return p, q
    lo, di, up = coupled_blocks(mesh, config, adjoint=True)
    stack = _pack(backward.u[1:], backward.v[1:])
    solved, ok = _kernels.implicit_solves(lo, di, up, float(th), config.dt, stack)
    if not ok:
        raise SingularSystemError("implicit adjoint step matrix is singular")
    qu, qv = _unpack(solved, mesh)  # levels 1..M
    p = np.empty_like(backward.u)
    q = np.empty_like(backward.v)
    p[0], q[0] = qu[0], qv[0]
    p[-1], q[-1] = qu[-1], qv[-1]
    p[1:-1] = th * qu[:-1] + (1.0 - th) * qu[1:]
    q[1:-1] = th * qv[:-1] + (1.0 - th) * qv[1:]
    return p, q


def energy_report(field: SpaceTimeField, config: SystemConfig, h=None) -> EnergyReport:
    mesh = field.mesh
    tau = control_time_weights(config)
    norms = field.norms_sq()
    e1 = assemble_diffusion(mesh, config.alpha1).energy(field.u)
    e2 = assemble_diffusion(mesh, config.alpha2).energy(field.v)
    grad = float(np.sum(tau * (e1 + e2)))
    src = 0.0 if h is None else float(np.sum(tau * mesh.inner(h, h)))
    init = float(norms[0])
    sup = float(np.max(norms))
    denom = init + src
    ratio = (sup + grad) / denom if denom > 0 else 0.0
    return EnergyReport(sup, grad, src, init, ratio)
