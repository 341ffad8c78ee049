"""Penalized HUM null control and observability estimates.

Let ``L`` map a control on omega to the final state reached from zero data
and ``L*`` its adjoint for the weighted inner products, realised by the
backward adjoint solve. ``Lambda = L L*`` is symmetric positive
semidefinite, and the penalized problem

    (Lambda + eps I) phi = X_free(T),   h = -L* phi

drives the final state to ``eps * phi``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, HypothesisWarning, InvalidArgument
from .evolution import (
    adjoint_control_trace,
    control_mask,
    solve_adjoint_backward,
    solve_adjoint_forward,
    solve_forward,
)
from .inequality_lab import coupling_bound
from .operators import SystemConfig, assemble_diffusion, coupled_blocks


def _pair_inner(mesh, a, b) -> float:
    return float(mesh.inner(a[0], b[0]) + mesh.inner(a[1], b[1]))


def adjoint_control(config: SystemConfig, pT, qT) -> np.ndarray:
    """``L*`` applied to final data: the adjoint trace restricted to omega."""
    back = solve_adjoint_backward(config, pT, qT)
    p, _ = adjoint_control_trace(config, back)
    return p * control_mask(back.mesh, config)[None, :]


def gramian_apply(config: SystemConfig, pT, qT) -> Tuple[np.ndarray, np.ndarray]:
    """Final state driven from rest by the control ``L*(pT, qT)``."""
    h = adjoint_control(config, pT, qT)
    n = config.nx + 1
    fwd = solve_forward(config, np.zeros(n), np.zeros(n), h)
    return fwd.final


@dataclass
class HumResult:
    control: np.ndarray
    epsilon: float
    cg_iterations: int
    cg_residual: float
    cost: float
    final_norm: float
    uncontrolled_final_norm: float
    final_state: Tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)
    hypothesis_ok: bool = True

    def summary(self) -> Dict[str, float]:
        return {
            "epsilon": self.epsilon,
            "cg_iterations": self.cg_iterations,
            "cg_residual": self.cg_residual,
            "cost": self.cost,
            "final_norm": self.final_norm,
            "uncontrolled_final_norm": self.uncontrolled_final_norm,
            "hypothesis_ok": self.hypothesis_ok,
        }


def _check_cascade(config: SystemConfig) -> bool:
    if coupling_bound(config) != 0.0:
        return True
    warnings.warn(
        "b21 is not bounded away from zero on omega1; the second component may be uncontrollable",
        HypothesisWarning,
        stacklevel=3,
    )
    return False


def hum_solve(
    config: SystemConfig,
    u0,
    v0,
    epsilon: float = 1e-4,
    cg_tol: float = 1e-8,
    cg_max_iter: int = 500,
) -> HumResult:
    """Conjugate gradient on ``(Lambda + eps I) phi = X_free(T)`` in the
    weighted inner product; ``cg_tol`` bounds the relative residual."""
    if not epsilon > 0:
        raise InvalidArgument(f"epsilon must be positive, got {epsilon!r}")
    if not cg_tol > 0 or int(cg_max_iter) < 1:
        raise InvalidArgument("cg_tol must be positive and cg_max_iter >= 1")
    ok = _check_cascade(config)
    mesh = config.mesh()
    free = solve_forward(config, u0, v0)
    b = np.array(free.final)
    free_norm = math.sqrt(_pair_inner(mesh, b, b))

    def apply(x):
        return np.array(gramian_apply(config, x[0], x[1])) + epsilon * x

    phi = np.zeros_like(b)
    iters = 0
    residual = 0.0
    if free_norm > 0:
        r = b.copy()
        d = r.copy()
        rr = _pair_inner(mesh, r, r)
        best = (math.inf, phi.copy())
        while True:
            residual = math.sqrt(rr) / free_norm
            if residual < best[0]:
                best = (residual, phi.copy())
            if residual <= cg_tol:
                break
            if iters >= cg_max_iter:
                raise ConvergenceFailure(
                    f"CG did not reach relative residual {cg_tol:g} in {cg_max_iter} iterations",
                    {"iterations": iters, "residual": residual, "best_residual": best[0], "best_iterate": best[1]},
                )
            ad = apply(d)
            step = rr / _pair_inner(mesh, d, ad)
            phi = phi + step * d
            r = r - step * ad
            rr_new = _pair_inner(mesh, r, r)
            d = r + (rr_new / rr) * d
            rr = rr_new
            iters += 1
    h = -adjoint_control(config, phi[0], phi[1])
    controlled = solve_forward(config, u0, v0, h)
    fin = np.array(controlled.final)
    return HumResult(
        control=h,
        epsilon=float(epsilon),
        cg_iterations=iters,
        cg_residual=float(residual),
        cost=0.5 * _pair_inner(mesh, b, phi),
        final_norm=math.sqrt(_pair_inner(mesh, fin, fin)),
        uncontrolled_final_norm=free_norm,
        final_state=(fin[0], fin[1]),
        hypothesis_ok=ok,
    )


# --- observability -------------------------------------------------------


@dataclass(frozen=True)
class ObservabilityEstimate:
    c_obs: float
    basis_size: int
    method: str

    @property
    def observable(self) -> bool:
        return math.isfinite(self.c_obs)


METHODS = ("reduced-basis", "dense-oracle")
NULL_TOL = 1e-13  # B eigenvalues below this fraction of the largest are round-off


def _time_weights(config: SystemConfig) -> np.ndarray:
    w = np.full(config.nt + 1, config.dt)
    w[0] = w[-1] = config.dt / 2
    return w


def observation(config: SystemConfig, U) -> float:
    """``int_0^T int_omega U^2`` with trapezoid weights in time."""
    mesh = config.mesh()
    wx = mesh.cell_weights * control_mask(mesh, config)
    return float(_time_weights(config) @ ((U**2) @ wx))


def observation_ratio(config: SystemConfig, U0, V0) -> float:
    """``||(U, V)(T)||^2 / int int_omega U^2`` for one adjoint trajectory."""
    f = solve_adjoint_forward(config, U0, V0)
    num = float(f.mesh.inner(f.u[-1], f.u[-1]) + f.mesh.inner(f.v[-1], f.v[-1]))
    den = observation(config, f.u)
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def smooth_basis(config: SystemConfig, count: int, seed: int = 0) -> np.ndarray:
    """Interior data vectors, shape ``(count, 2, n-1)``: slowest modes of the
    block diffusion operator followed by random vectors."""
    mesh = config.mesh()
    m = mesh.n - 1
    if not 1 <= count <= 2 * m:
        raise InvalidArgument(f"basis_size must lie in [1, {2 * m}], got {count}")
    w = mesh.cell_weights[1:-1]
    n_rand = count // 4
    n_modes = count - n_rand
    modes = []
    for slot, alpha in ((0, config.alpha1), (1, config.alpha2)):
        k = -np.diag(w) @ assemble_diffusion(mesh, alpha).to_dense()
        k = 0.5 * (k + k.T)
        vals, vecs = sla.eigh(k, np.diag(w))
        for lam, vec in zip(vals, vecs.T):
            modes.append((lam, slot, vec))
    modes.sort(key=lambda t: t[0])
    out = np.zeros((count, 2, m))
    for i, (_, slot, vec) in enumerate(modes[:n_modes]):
        out[i, slot] = vec
    rng = np.random.default_rng(seed)
    out[n_modes:] = rng.standard_normal((n_rand, 2, m))
    return out


def _trajectories(config: SystemConfig, basis) -> np.ndarray:
    """Interior adjoint states for every basis vector, shape ``(count, nt+1, 2, n-1)``."""
    n = config.nx + 1
    out = np.empty((basis.shape[0], config.nt + 1, 2, n - 2))
    full = np.zeros(n)
    for i, b in enumerate(basis):
        u0, v0 = full.copy(), full.copy()
        u0[1:-1], v0[1:-1] = b
        f = solve_adjoint_forward(config, u0, v0)
        out[i, :, 0] = f.u[:, 1:-1]
        out[i, :, 1] = f.v[:, 1:-1]
    return out


def _dense_trajectories(config: SystemConfig) -> np.ndarray:
    """Same as :func:`_trajectories` for the canonical basis, built from dense
    powers of the one-step matrix instead of the banded march."""
    mesh = config.mesh()
    m = mesh.n - 1
    lo, di, up = coupled_blocks(mesh, config, adjoint=True)
    M = np.zeros((2 * m, 2 * m))
    for i in range(m):
        M[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = di[i]
        if i > 0:
            M[2 * i : 2 * i + 2, 2 * i - 2 : 2 * i] = lo[i]
        if i < m - 1:
            M[2 * i : 2 * i + 2, 2 * i + 2 : 2 * i + 4] = up[i]
    th, dt = config.theta_scheme, config.dt
    eye = np.eye(2 * m)
    G = sla.solve(eye - th * dt * M, eye + (1 - th) * dt * M)
    states = np.empty((config.nt + 1, 2 * m, 2 * m))
    states[0] = eye
    for n in range(1, config.nt + 1):
        states[n] = G @ states[n - 1]
    # columns are basis vectors (interleaved per node); reorder to (count, nt+1, 2, m)
    traj = states.reshape(config.nt + 1, m, 2, 2 * m).transpose(3, 0, 2, 1)
    order = np.concatenate([np.arange(0, 2 * m, 2), np.arange(1, 2 * m, 2)])
    return traj[order]


def _gramians(config: SystemConfig, traj: np.ndarray):
    mesh = config.mesh()
    w = mesh.cell_weights[1:-1]
    wo = w * control_mask(mesh, config)[1:-1]
    final = traj[:, -1]
    A = np.einsum("isk,jsk,k->ij", final, final, w)
    B = np.einsum("n,inl,jnl,l->ij", _time_weights(config), traj[:, :, 0], traj[:, :, 0], wo)
    return 0.5 * (A + A.T), 0.5 * (B + B.T)


def _max_generalized(A, B) -> float:
    """``sup x'Ax / x'Bx``; infinite when B has a null direction A sees."""
    bv, bq = np.linalg.eigh(B)
    top = max(float(bv[-1]), 0.0)
    if top == 0.0:
        return math.inf if np.max(np.abs(A)) > 0 else 0.0
    keep = bv > NULL_TOL * top
    scale_a = max(float(np.max(np.linalg.eigvalsh(A))), 0.0)
    if (~keep).any():
        null = bq[:, ~keep]
        seen = float(np.max(np.linalg.eigvalsh(null.T @ A @ null)))
        if seen > 1e-6 * scale_a:
            return math.inf
    q = bq[:, keep] / np.sqrt(bv[keep])
    return float(np.max(np.linalg.eigvalsh(q.T @ A @ q)))


def observability_estimate(
    config: SystemConfig, basis_size: int = 24, method: str = "reduced-basis", seed: int = 0
) -> ObservabilityEstimate:
    """Largest ``||(U, V)(T)||^2 / int int_omega U^2`` over a data subspace.

    ``reduced-basis`` marches each vector of :func:`smooth_basis`;
    ``dense-oracle`` uses every interior unit vector via dense matrix powers.
    """
    if method not in METHODS:
        raise InvalidArgument(f"method must be one of {METHODS}")
    if method == "dense-oracle":
        traj = _dense_trajectories(config)
    else:
        basis = smooth_basis(config, basis_size, seed)
        traj = _trajectories(config, basis)
    A, B = _gramians(config, traj)
    return ObservabilityEstimate(_max_generalized(A, B), int(traj.shape[0]), method)
