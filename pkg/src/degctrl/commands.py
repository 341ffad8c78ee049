"""Command pipelines. Each returns an :class:`Output` that the CLI writes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence

import numpy as np

from . import hum_control as hum
from . import inequality_lab as lab
from .config import RunConfig
from .errors import InvalidArgument
from .evolution import energy_report, solve_adjoint_forward, solve_forward
from .operators import build_mesh
from .weights import check_phi_ordering, theta_bound_constants, validate_params

RATIO_COLUMNS = ("s", "lhs", "rhs", "ratio", "variant")
HARDY_COLUMNS = ("gamma", "profile", "lhs", "rhs_integral", "c_gamma", "pass")
NORM_COLUMNS = ("t", "u_norm_sq", "v_norm_sq")


@dataclass
class Output:
    command: str
    columns: Sequence[str] = ()
    rows: List[Sequence[Any]] = field(default_factory=list)
    record: Dict[str, Any] = field(default_factory=dict)
    json_only: bool = False

    def as_json(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"command": self.command}
        if self.columns:
            doc["columns"] = list(self.columns)
            doc["rows"] = [list(r) for r in self.rows]
        doc.update(self.record)
        return doc


def _norm_rows(field_):
    m = field_.mesh
    nu = m.inner(field_.u, field_.u)
    nv = m.inner(field_.v, field_.v)
    return [(float(t), float(a), float(b)) for t, a, b in zip(field_.times, nu, nv)]


def run_solve(cfg: RunConfig) -> Output:
    sysc = cfg.system()
    u0, v0 = cfg.initial_data()
    f = solve_forward(sysc, u0, v0)
    rep = energy_report(f, sysc)
    rows = _norm_rows(f)
    rec = {
        "final_norm": math.sqrt(rows[-1][1] + rows[-1][2]),
        "energy": {
            "sup_norm_sq": rep.sup_norm_sq,
            "gradient_integral": rep.gradient_integral,
            "initial_norm_sq": rep.initial_norm_sq,
            "bound_ratio": rep.bound_ratio,
        },
    }
    return Output("solve", NORM_COLUMNS, rows, rec)


def run_adjoint(cfg: RunConfig) -> Output:
    sysc = cfg.system()
    u0, v0 = cfg.initial_data()
    f = solve_adjoint_forward(sysc, u0, v0)
    rows = _norm_rows(f)
    rec = {
        "final_norm": math.sqrt(rows[-1][1] + rows[-1][2]),
        "observation": hum.observation(sysc, f.u),
    }
    return Output("adjoint", NORM_COLUMNS, rows, rec)


def run_hum(cfg: RunConfig) -> Output:
    sysc = cfg.system()
    u0, v0 = cfg.initial_data()
    results = []
    for eps in cfg.epsilon:
        r = hum.hum_solve(sysc, u0, v0, eps, cfg.cg_tol, cfg.cg_max_iter)
        doc = r.summary()
        doc["control"] = r.control
        results.append(doc)
    return Output("hum", record={"results": results}, json_only=True)


def run_observability(cfg: RunConfig) -> Output:
    est = hum.observability_estimate(cfg.system(), cfg.basis_size, cfg.obs_method, cfg.seed)
    rec = {"c_obs": est.c_obs, "observable": est.observable, "basis_size": est.basis_size, "method": est.method}
    return Output("observability", ("method", "basis_size", "c_obs", "observable"),
                  [(est.method, est.basis_size, est.c_obs, est.observable)], rec)


def run_check_hardy(cfg: RunConfig) -> Output:
    mesh = build_mesh(cfg.hardy_nx, cfg.hardy_grading)
    x = mesh.nodes
    rows = []
    for g in cfg.gammas:
        for off in cfg.hardy_offsets:
            r = (1.0 - g) / 2.0 + off
            res = lab.hardy_ratio(g, x**r, mesh)
            rows.append((g, f"x^{r:.17g}", res.lhs, res.rhs_integral, res.c_gamma, res.passed))
    return Output("check-hardy", HARDY_COLUMNS, rows, {"all_pass": all(r[-1] for r in rows)})


def s_values(cfg: RunConfig) -> tuple:
    if cfg.s is not None:
        return (cfg.s,)
    if cfg.s_count == 1:
        return (cfg.s_min,)
    return tuple(float(v) for v in np.geomspace(cfg.s_min, cfg.s_max, cfg.s_count))


def adjoint_fixture(cfg: RunConfig):
    u0, v0 = cfg.initial_data()
    return solve_adjoint_forward(cfg.system(), u0, v0)


def carleman_reports(cfg: RunConfig) -> Dict[str, lab.RatioReport]:
    params = cfg.weight_params()
    sysc = cfg.system()
    grid = s_values(cfg)
    reports: Dict[str, lab.RatioReport] = {}
    sol = None
    fixture = None
    for variant in cfg.variants:
        if variant in lab.SINGLE_VARIANTS:
            if sol is None:
                sol = lab.manufacture_solution(cfg.profile, cfg.alpha1, cfg.T, sysc.mesh(), sysc.times())

            def fn(s, v=variant):
                return lab.carleman_single(sol.y, sol.f, params, s, v, alpha=cfg.alpha1, omega_prime=cfg.omega_prime)
        else:
            if fixture is None:
                fixture = adjoint_fixture(cfg)

            def fn(s, v=variant):
                return lab.carleman_coupled(fixture, params, s, v, sysc, cfg.omega_prime, (cfg.mu1, cfg.mu2))

        reports[variant] = lab.sweep_s(fn, grid, cfg.s_min)
    return reports


def _report_rows(reports):
    rows = []
    summary = {}
    for variant, rep in reports.items():
        rows += [(e.s, e.lhs, e.rhs, e.ratio, e.variant) for e in rep.entries]
        summary[variant] = {
            "max_ratio": rep.max_ratio,
            "slope": rep.slope,
            "finite": rep.finite,
            "bounded": rep.bounded,
        }
    return rows, summary


def run_check_carleman(cfg: RunConfig) -> Output:
    rows, summary = _report_rows(carleman_reports(cfg))
    return Output("check-carleman", RATIO_COLUMNS, rows, {"s0": cfg.s_min, "summary": summary})


def caccioppoli_report(cfg: RunConfig) -> lab.RatioReport:
    params = cfg.weight_params()
    fixture = adjoint_fixture(cfg)
    return lab.sweep_s(
        lambda s: lab.caccioppoli_check(fixture, params, cfg.omega, cfg.omega_prime, s), s_values(cfg), cfg.s_min
    )


def run_check_caccioppoli(cfg: RunConfig) -> Output:
    rows, summary = _report_rows({"caccioppoli": caccioppoli_report(cfg)})
    return Output("check-caccioppoli", RATIO_COLUMNS, rows, {"s0": cfg.s_min, "summary": summary})


def run_check_weights(cfg: RunConfig) -> Output:
    params = cfg.weight_params()
    adm = validate_params(params, (cfg.alpha1, cfg.alpha2))
    sysc = cfg.system()
    times = sysc.times()
    order = check_phi_ordering(params, sysc.mesh(), times)
    tb = theta_bound_constants(cfg.T, cfg.k)
    rows = [
        ("lambda_lower", adm.lambda_interval[0]),
        ("lambda_upper", adm.lambda_interval[1]),
        ("lambda", params.lam_value),
        ("admissible", adm.admissible),
        ("ordering_holds", order.holds),
        ("c1", tb.c1),
        ("c2", tb.c2),
        ("c3", tb.c3),
        ("c4", tb.c4),
        ("theta_bounds_verified", tb.verified),
    ]
    rows += [(f"observed_{k}", v) for k, v in tb.observed.items()]
    rows += [(f"ratio_{k}", v) for k, v in tb.ratios.items()]
    rec = {"messages": list(adm.messages)}
    return Output("check-weights", ("quantity", "value"), rows, rec)


COMMANDS: Dict[str, Callable[[RunConfig], Output]] = {
    "solve": run_solve,
    "adjoint": run_adjoint,
    "hum": run_hum,
    "observability": run_observability,
    "check-hardy": run_check_hardy,
    "check-caccioppoli": run_check_caccioppoli,
    "check-carleman": run_check_carleman,
    "check-weights": run_check_weights,
}


def summarize(target: str, cfg: RunConfig) -> Dict[str, Any]:
    """Scalar metrics of one sweep cell, in a fixed key order per target."""
    if target == "solve":
        out = run_solve(cfg)
        return {"final_norm": out.record["final_norm"], "bound_ratio": out.record["energy"]["bound_ratio"]}
    if target == "adjoint":
        out = run_adjoint(cfg)
        return {"final_norm": out.record["final_norm"], "observation": out.record["observation"]}
    if target == "hum":
        if not cfg.epsilon:
            raise InvalidArgument("hum needs at least one epsilon")
        r = hum.hum_solve(cfg.system(), *cfg.initial_data(), cfg.epsilon[-1], cfg.cg_tol, cfg.cg_max_iter)
        return {
            "final_norm": r.final_norm,
            "uncontrolled_final_norm": r.uncontrolled_final_norm,
            "cg_iterations": r.cg_iterations,
            "cost": r.cost,
        }
    if target == "observability":
        return {"c_obs": run_observability(cfg).record["c_obs"]}
    if target in ("check-carleman", "check-caccioppoli"):
        if target == "check-carleman":
            if not cfg.variants:
                raise InvalidArgument("check-carleman needs at least one variant")
            rep = carleman_reports(cfg)[cfg.variants[0]]
        else:
            rep = caccioppoli_report(cfg)
        return {"max_ratio": rep.max_ratio, "slope": rep.slope, "finite": rep.finite}
    raise InvalidArgument(f"unknown sweep target {target!r}")


SUMMARY_COLUMNS = {
    "solve": ("final_norm", "bound_ratio"),
    "adjoint": ("final_norm", "observation"),
    "hum": ("final_norm", "uncontrolled_final_norm", "cg_iterations", "cost"),
    "observability": ("c_obs",),
    "check-carleman": ("max_ratio", "slope", "finite"),
    "check-caccioppoli": ("max_ratio", "slope", "finite"),
}
