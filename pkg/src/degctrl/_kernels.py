"""Hot loops for the 2x2 block-tridiagonal time march.

Every kernel is written once in plain Python/numpy and compiled with
``numba.njit`` when numba is importable. Set ``DEGCTRL_DISABLE_NUMBA=1`` to
force the interpreted path (same code, no compilation); the flag is read once
at import, so comparing both paths needs two processes (see
``benchmarks/bench_march.py``).

Block layout: ``lo[i]``, ``di[i]``, ``up[i]`` are ``(2, 2)`` blocks coupling
interior node ``i`` to nodes ``i-1``, ``i``, ``i+1``; ``lo[0]`` and
``up[-1]`` are ignored. Unknown vectors have shape ``(n, 2)`` holding the
(u, v) pair per node.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("DEGCTRL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not _DISABLED

PIVOT_TOL = 1e-300


def _block_factor(lo, di, up):
    """Block LU without pivoting. Returns (dinv, cprime, ok)."""
    n = di.shape[0]
    dinv = np.empty((n, 2, 2))
    cprime = np.zeros((n, 2, 2))
    ok = True
    for i in range(n):
        a = di[i, 0, 0]
        b = di[i, 0, 1]
        c = di[i, 1, 0]
        d = di[i, 1, 1]
        if i > 0:
            # D_i - L_i C'_{i-1}
            l00 = lo[i, 0, 0]
            l01 = lo[i, 0, 1]
            l10 = lo[i, 1, 0]
            l11 = lo[i, 1, 1]
            p = cprime[i - 1]
            a -= l00 * p[0, 0] + l01 * p[1, 0]
            b -= l00 * p[0, 1] + l01 * p[1, 1]
            c -= l10 * p[0, 0] + l11 * p[1, 0]
            d -= l10 * p[0, 1] + l11 * p[1, 1]
        det = a * d - b * c
        scale = abs(a) + abs(b) + abs(c) + abs(d)
        if not (abs(det) > PIVOT_TOL * scale * scale):
            ok = False
            det = 1.0
        inv_det = 1.0 / det
        dinv[i, 0, 0] = d * inv_det
        dinv[i, 0, 1] = -b * inv_det
        dinv[i, 1, 0] = -c * inv_det
        dinv[i, 1, 1] = a * inv_det
        if i < n - 1:
            for r in range(2):
                for s in range(2):
                    cprime[i, r, s] = dinv[i, r, 0] * up[i, 0, s] + dinv[i, r, 1] * up[i, 1, s]
    return dinv, cprime, ok


def _block_solve(lo, dinv, cprime, rhs):
    n = rhs.shape[0]
    y = np.empty((n, 2))
    for i in range(n):
        r0 = rhs[i, 0]
        r1 = rhs[i, 1]
        if i > 0:
            r0 -= lo[i, 0, 0] * y[i - 1, 0] + lo[i, 0, 1] * y[i - 1, 1]
            r1 -= lo[i, 1, 0] * y[i - 1, 0] + lo[i, 1, 1] * y[i - 1, 1]
        y[i, 0] = dinv[i, 0, 0] * r0 + dinv[i, 0, 1] * r1
        y[i, 1] = dinv[i, 1, 0] * r0 + dinv[i, 1, 1] * r1
    for i in range(n - 2, -1, -1):
        y0 = y[i + 1, 0]
        y1 = y[i + 1, 1]
        y[i, 0] -= cprime[i, 0, 0] * y0 + cprime[i, 0, 1] * y1
        y[i, 1] -= cprime[i, 1, 0] * y0 + cprime[i, 1, 1] * y1
    return y


def _block_matvec(lo, di, up, x):
    n = x.shape[0]
    out = np.empty((n, 2))
    for i in range(n):
        for r in range(2):
            acc = di[i, r, 0] * x[i, 0] + di[i, r, 1] * x[i, 1]
            if i > 0:
                acc += lo[i, r, 0] * x[i - 1, 0] + lo[i, r, 1] * x[i - 1, 1]
            if i < n - 1:
                acc += up[i, r, 0] * x[i + 1, 0] + up[i, r, 1] * x[i + 1, 1]
            out[i, r] = acc
    return out


def _shifted(lo, di, up, a):
    """Blocks of I - a*M."""
    slo = -a * lo
    sup = -a * up
    sdi = -a * di
    for i in range(di.shape[0]):
        sdi[i, 0, 0] += 1.0
        sdi[i, 1, 1] += 1.0
    return slo, sdi, sup


def _theta_march(lo, di, up, theta, dt, x0, forcing):
    """Integrate X' = M X + F with the theta-scheme.

    ``forcing[m]`` is the already time-weighted source added to the right-hand
    side of step ``m-1 -> m`` (``forcing[0]`` unused). Returns
    ``(states, ok)`` with ``states`` of shape ``(nsteps + 1, n, 2)``.
    """
    nsteps = forcing.shape[0] - 1
    slo, sdi, sup = _shifted(lo, di, up, theta * dt)
    dinv, cprime, ok = _block_factor(slo, sdi, sup)
    states = np.zeros((nsteps + 1, x0.shape[0], 2))
    states[0] = x0
    explicit = (1.0 - theta) * dt
    for m in range(1, nsteps + 1):
        rhs = states[m - 1] + forcing[m]
        if explicit != 0.0:
            rhs = rhs + explicit * _block_matvec(lo, di, up, states[m - 1])
        states[m] = _block_solve(slo, dinv, cprime, rhs)
    return states, ok


def _implicit_solves(lo, di, up, theta, dt, rhs_stack):
    """Apply (I - theta*dt*M)^{-1} to every vector in ``rhs_stack``."""
    slo, sdi, sup = _shifted(lo, di, up, theta * dt)
    dinv, cprime, ok = _block_factor(slo, sdi, sup)
    out = np.empty_like(rhs_stack)
    for m in range(rhs_stack.shape[0]):
        out[m] = _block_solve(slo, dinv, cprime, rhs_stack[m])
    return out, ok


if USE_NUMBA:
    # compiled in dependency order so callers resolve to the compiled helpers
    _block_factor = numba.njit(cache=True)(_block_factor)
    _block_solve = numba.njit(cache=True)(_block_solve)
    _block_matvec = numba.njit(cache=True)(_block_matvec)
    _shifted = numba.njit(cache=True)(_shifted)
    _theta_march = numba.njit(cache=True)(_theta_march)
    _implicit_solves = numba.njit(cache=True)(_implicit_solves)

block_factor = _block_factor
block_solve = _block_solve
block_matvec = _block_matvec
theta_march = _theta_march
implicit_solves = _implicit_solves
