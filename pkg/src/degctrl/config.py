"""Flat ``key=value`` run configuration.

Pairs may share a line (separated by whitespace) and ``#`` starts a comment.
Lists and intervals are comma separated. Keys whose default is ``auto`` are
resolved during parsing, so a parsed config is fully explicit and
``parse_config(serialize_config(c)) == c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidArgument
from .inequality_lab import COUPLED_VARIANTS, SINGLE_VARIANTS, empirical_s0
from .operators import CoefficientSpec, SystemConfig
from .weights import WeightParams, build_sigma, lambda_interval

REQUIRED = ("alpha1", "alpha2", "T", "nx", "nt")
INITIAL_PROFILES = ("sin", "zero", "bump", "random")
FORMATS = ("csv", "json")
SWEEP_TARGETS = ("solve", "adjoint", "hum", "observability", "check-carleman", "check-caccioppoli")


@dataclass(frozen=True)
class RunConfig:
    alpha1: float
    alpha2: float
    T: float
    nx: int
    nt: int
    omega: Tuple[float, float] = (0.3, 0.8)
    omega1: Optional[Tuple[float, float]] = None
    b11: float = 0.0
    b12: float = 0.0
    b21: float = 0.0
    b22: float = 0.0
    b11_support: Optional[Tuple[float, float]] = None
    b12_support: Optional[Tuple[float, float]] = None
    b21_support: Optional[Tuple[float, float]] = None
    b22_support: Optional[Tuple[float, float]] = None
    theta_scheme: float = 1.0
    grading: float = 2.0
    beta: Optional[float] = None
    k: int = 4
    d: float = 5.0
    rho: float = 3.0
    lam: Optional[float] = None
    sigma_a: float = 0.0
    sigma_center: Optional[float] = None
    omega_prime: Optional[Tuple[float, float]] = None
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    s_min: Optional[float] = None
    s_max: Optional[float] = None
    s_count: int = 8
    s: Optional[float] = None
    variants: Tuple[str, ...] = ("full-boundary", "localized", "two-observation", "one-force")
    profile: str = "poly"
    epsilon: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    cg_tol: float = 1e-8
    cg_max_iter: int = 500
    basis_size: int = 24
    obs_method: str = "reduced-basis"
    gammas: Tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5)
    hardy_offsets: Tuple[float, ...] = (0.5, 0.3, 0.2, 0.15)
    hardy_nx: int = 400
    hardy_grading: float = 8.0
    u0: str = "sin"
    v0: str = "sin"
    seed: int = 0
    sweep_target: str = "hum"
    out: Optional[str] = None
    format: str = "csv"

    # --- derived objects ---

    def system(self) -> SystemConfig:
        def coef(name):
            return CoefficientSpec(getattr(self, name), getattr(self, name + "_support"))

        return SystemConfig(
            self.alpha1,
            self.alpha2,
            self.T,
            omega=self.omega,
            omega1=self.omega1,
            b11=coef("b11"),
            b12=coef("b12"),
            b21=coef("b21"),
            b22=coef("b22"),
            nx=self.nx,
            nt=self.nt,
            theta_scheme=self.theta_scheme,
            grading=self.grading,
        )

    def weight_params(self) -> WeightParams:
        # keep the critical set of sigma inside the observation window
        xc, (a, b) = self.sigma_center, self.omega_prime
        r = 0.5 * min(xc - a, b - xc, xc - self.sigma_a, 1.0 - xc)
        sigma = build_sigma(self.sigma_a, xc, (xc - r, xc + r))
        return WeightParams(self.T, self.beta, sigma, self.k, self.d, self.rho, self.lam)

    def initial_data(self) -> Tuple[np.ndarray, np.ndarray]:
        x = self.system().mesh().nodes
        rng = np.random.default_rng(self.seed)
        return _profile(self.u0, x, rng), _profile(self.v0, x, rng)


def _profile(name, x, rng):
    if name == "sin":
        f = np.sin(np.pi * x)
    elif name == "zero":
        f = np.zeros_like(x)
    elif name == "bump":
        f = np.exp(-100.0 * (x - 0.5) ** 2) * x * (1 - x) * 4
    else:
        f = rng.standard_normal(x.size)
    f[0] = f[-1] = 0.0
    return f


# --- field table ---------------------------------------------------------

_AUTO = "auto"
_NONE = "none"


def _to_float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _to_int(s):
    try:
        v = float(s)
    except ValueError:
        raise ValueError("must be an integer") from None
    if not math.isfinite(v) or v != int(v):
        raise ValueError("must be an integer")
    return int(v)


def _to_interval(s):
    parts = [p for p in s.split(",") if p]
    if len(parts) != 2:
        raise ValueError("must be two comma separated numbers a,b")
    a, b = (_to_float(p) for p in parts)
    return (a, b)


def _list(conv):
    def parse(s):
        if s == "":
            return ()
        return tuple(conv(p) for p in s.split(","))

    return parse


def _opt(conv, token):
    def parse(s):
        return None if s == token else conv(s)

    return parse


_PARSERS: Dict[str, Callable[[str], Any]] = {
    "alpha1": _to_float,
    "alpha2": _to_float,
    "T": _to_float,
    "nx": _to_int,
    "nt": _to_int,
    "omega": _to_interval,
    "omega1": _opt(_to_interval, _NONE),
    "theta_scheme": _to_float,
    "grading": _to_float,
    "beta": _opt(_to_float, _AUTO),
    "k": _to_int,
    "d": _to_float,
    "rho": _to_float,
    "lambda": _opt(_to_float, _AUTO),
    "sigma_a": _to_float,
    "sigma_center": _opt(_to_float, _AUTO),
    "omega_prime": _opt(_to_interval, _AUTO),
    "mu1": _opt(_to_float, _AUTO),
    "mu2": _opt(_to_float, _AUTO),
    "s_min": _opt(_to_float, _AUTO),
    "s_max": _opt(_to_float, _AUTO),
    "s_count": _to_int,
    "s": _opt(_to_float, _NONE),
    "variants": _list(str),
    "profile": str,
    "epsilon": _list(_to_float),
    "cg_tol": _to_float,
    "cg_max_iter": _to_int,
    "basis_size": _to_int,
    "obs_method": str,
    "gammas": _list(_to_float),
    "hardy_offsets": _list(_to_float),
    "hardy_nx": _to_int,
    "hardy_grading": _to_float,
    "u0": str,
    "v0": str,
    "seed": _to_int,
    "sweep_target": str,
    "out": _opt(str, _NONE),
    "format": str,
}
for _b in ("b11", "b12", "b21", "b22"):
    _PARSERS[_b] = _to_float
    _PARSERS[_b + "_support"] = _opt(_to_interval, _NONE)

# config key -> dataclass attribute
_ATTR = {"lambda": "lam"}
_KEY = {v: k for k, v in _ATTR.items()}
KEYS = tuple(_KEY.get(f.name, f.name) for f in fields(RunConfig))


def _fail(key, constraint, value):
    raise ConfigError(f"{key}={value!r}: requires {constraint}")


def _validate(c: RunConfig) -> None:
    """Range checks, each naming the key and its constraint."""
    checks = [
        ("alpha1", "0 < alpha1 < 1", 0 < c.alpha1 < 1),
        ("alpha2", "0 < alpha2 < 1", 0 < c.alpha2 < 1),
        ("T", "T > 0", c.T > 0),
        ("nx", "nx >= 4", c.nx >= 4),
        ("nt", "nt >= 1", c.nt >= 1),
        ("theta_scheme", "1/2 <= theta_scheme <= 1", 0.5 <= c.theta_scheme <= 1),
        ("grading", "grading >= 1", c.grading >= 1),
        ("k", "k ≥ 4", c.k >= 4),
        ("d", "d ≥ 5", c.d >= 5),
        ("rho", "rho > 4 ln 2", c.rho > 4 * math.log(2)),
        ("sigma_a", "0 <= sigma_a < 1", 0 <= c.sigma_a < 1),
        ("s_count", "s_count >= 1", c.s_count >= 1),
        ("cg_tol", "cg_tol > 0", c.cg_tol > 0),
        ("cg_max_iter", "cg_max_iter >= 1", c.cg_max_iter >= 1),
        ("basis_size", "basis_size >= 1", c.basis_size >= 1),
        ("epsilon", "every epsilon > 0", all(e > 0 for e in c.epsilon)),
        ("gammas", "every gamma < 1", all(g < 1 for g in c.gammas)),
        ("hardy_offsets", "every offset > 0", all(o > 0 for o in c.hardy_offsets)),
        ("hardy_nx", "hardy_nx >= 4", c.hardy_nx >= 4),
        ("hardy_grading", "hardy_grading >= 1", c.hardy_grading >= 1),
        ("obs_method", "one of reduced-basis, dense-oracle", c.obs_method in ("reduced-basis", "dense-oracle")),
        ("profile", "one of poly, decay, sine", c.profile in ("poly", "decay", "sine")),
        ("u0", f"one of {', '.join(INITIAL_PROFILES)}", c.u0 in INITIAL_PROFILES),
        ("v0", f"one of {', '.join(INITIAL_PROFILES)}", c.v0 in INITIAL_PROFILES),
        ("format", "one of csv, json", c.format in FORMATS),
        ("sweep_target", f"one of {', '.join(SWEEP_TARGETS)}", c.sweep_target in SWEEP_TARGETS),
    ]
    for key, constraint, ok in checks:
        if not ok:
            _fail(key, constraint, getattr(c, _ATTR.get(key, key)))
    amax = max(c.alpha1, c.alpha2)
    if not amax <= c.beta < 1:
        _fail("beta", f"max(alpha1, alpha2) = {amax} <= beta < 1", c.beta)
    lo, hi = lambda_interval(c.d, c.rho)
    if not lo < c.lam < hi:
        _fail("lambda", f"{lo!r} < lambda < {hi!r}", c.lam)
    if not c.sigma_a < c.sigma_center < 1:
        _fail("sigma_center", "sigma_a < sigma_center < 1", c.sigma_center)
    if not c.omega_prime[0] < c.sigma_center < c.omega_prime[1]:
        _fail("sigma_center", f"sigma_center inside omega_prime={c.omega_prime}", c.sigma_center)
    a, b = c.omega
    if not (c.omega_prime[0] >= a and c.omega_prime[1] <= b and c.omega_prime[0] < c.omega_prime[1]):
        _fail("omega_prime", f"a sub-interval of omega={c.omega}", c.omega_prime)
    for i, a_i in ((1, c.alpha1), (2, c.alpha2)):
        floor = max(0.0, 2 + 2 * a_i - 3 * c.beta)
        if getattr(c, f"mu{i}") < floor:
            _fail(f"mu{i}", f"mu{i} >= max(0, 2 + 2 alpha{i} - 3 beta) = {floor!r}", getattr(c, f"mu{i}"))
    if c.s_min <= 0 or c.s_max < c.s_min:
        _fail("s_max", "0 < s_min <= s_max", (c.s_min, c.s_max))
    if c.s is not None and c.s <= 0:
        _fail("s", "s > 0", c.s)
    for v in c.variants:
        if v not in SINGLE_VARIANTS + COUPLED_VARIANTS:
            _fail("variants", f"entries from {SINGLE_VARIANTS + COUPLED_VARIANTS}", v)
    try:
        c.system()
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _resolve(values: Dict[str, Any]) -> RunConfig:
    c = RunConfig(**values)
    upd: Dict[str, Any] = {}
    if c.beta is None:
        upd["beta"] = max(c.alpha1, c.alpha2)
    if c.lam is None:
        lo, hi = lambda_interval(c.d, c.rho)
        upd["lam"] = 0.5 * (lo + hi)
    if c.sigma_center is None:
        upd["sigma_center"] = 0.5 * (c.omega[0] + c.omega[1])
    if c.omega_prime is None:
        a, b = c.omega
        upd["omega_prime"] = (a + 0.25 * (b - a), b - 0.25 * (b - a))
    c = replace(c, **upd)
    upd = {}
    for i, a_i in ((1, c.alpha1), (2, c.alpha2)):
        if getattr(c, f"mu{i}") is None:
            upd[f"mu{i}"] = max(0.0, 2 + 2 * a_i - c.beta * 3)
    c = replace(c, **upd)
    if c.s_min is None or c.s_max is None:
        s0 = c.s_min
        if s0 is None:
            _validate_for_s0(c)
            s0 = empirical_s0(c.weight_params(), c.system().mesh())
        c = replace(c, s_min=s0, s_max=c.s_max if c.s_max is not None else 10.0 * s0)
    _validate(c)
    return c


def _validate_for_s0(c: RunConfig) -> None:
    # the weights must be constructible before s0 can be searched
    probe = replace(c, s_min=1.0, s_max=1.0)
    _validate(probe)


def parse_pairs(text: str) -> Dict[str, str]:
    """Raw ``key -> value`` strings, with unknown and duplicate keys rejected."""
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
            key, val = token.split("=", 1)
            if key not in _PARSERS:
                raise ConfigError(f"unknown key {key!r}")
            if key in pairs:
                raise ConfigError(f"duplicate key {key!r}")
            pairs[key] = val
    return pairs


def build_config(pairs: Dict[str, str]) -> RunConfig:
    values: Dict[str, Any] = {}
    for key, val in pairs.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[_ATTR.get(key, key)] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"{key}={val!r}: {exc}") from None
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    return _resolve(values)


def parse_config(text: str) -> RunConfig:
    return build_config(parse_pairs(text))


def _fmt(v) -> str:
    if v is None:
        return _NONE
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(p) for p in v)
    return str(v)


def serialize_config(c: RunConfig) -> str:
    """One ``key=value`` per line in declaration order; floats exactly."""
    lines = []
    for f in fields(RunConfig):
        lines.append(f"{_KEY.get(f.name, f.name)}={_fmt(getattr(c, f.name))}")
    return "\n".join(lines) + "\n"
