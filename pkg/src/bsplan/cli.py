"""Command-line interface: ``design``, ``evaluate``, ``decide``, ``simulate`` and ``tables``.

Exit codes are 0 on success, 2 for bad input and 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .costs import CostModel
from .decision import DecisionRule, phi
from .errors import BsplanError, EnumerationCapExceeded, InputError
from .evaluator import PlanEvaluator, assemble_report, no_sampling_report
from .mle import fit_total_rate
from .model import IntervalData, SamplingPlan
from .optimizer import SearchOptions, optimize_plan, optimize_plan_approx
from .prior import PriorSpec
from .risk import approx_bayes_risk, approx_bayes_risk_quad, bayes_risk
from .simulator import empirical_oc

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

PRIOR_KEYS = ("alpha", "eta", "dir_alphas")
COST_KEYS = ("c0", "c_lin", "c_quad", "c_reject", "c_sample", "salvage", "c_time", "c_inspect", "t0")
SEARCH_KEYS = ("mode", "h_grid", "refine_tol", "n_cap", "k_cap", "mc_draws", "seed", "approx_method",
               "snap_to_grid", "coarse_factor")
BUNDLED = ("example1", "example2")


@dataclass
class RunConfig:
    """Validated contents of a JSON configuration file."""

    prior: PriorSpec
    costs: CostModel
    search: SearchOptions
    outputs: dict = field(default_factory=dict)
    source: str = ""

    def as_dict(self) -> dict:
        c = self.costs
        search = {k: getattr(self.search, k) for k in SEARCH_KEYS}
        return {
            "prior": {"alpha": self.prior.alpha, "eta": self.prior.eta,
                      "dir_alphas": list(self.prior.dir_alphas)},
            "costs": {"c0": c.c0, "c_lin": list(c.c_lin), "c_quad": c.c_quad.tolist(),
                      "c_reject": c.c_reject, "c_sample": c.c_sample, "salvage": c.salvage,
                      "c_time": c.c_time, "c_inspect": c.c_inspect, "t0": c.t0},
            "search": search,
        }

    def with_costs(self, **changes) -> "RunConfig":
        return RunConfig(self.prior, self.costs.replace(**changes), self.search, self.outputs, self.source)

    def with_prior(self, **changes) -> "RunConfig":
        return RunConfig(self.prior.replace(**changes), self.costs, self.search, self.outputs, self.source)


def _section(raw: dict, name: str, allowed, required) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise InputError(f"config: missing section '{name}'")
        return {}
    if not isinstance(sec, dict):
        raise InputError(f"config: '{name}' must be an object")
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise InputError(f"config: unknown field(s) {', '.join(f'{name}.{u}' for u in unknown)}")
    if required:
        missing = [k for k in allowed if k not in sec]
        if missing:
            raise InputError(f"config: missing field(s) {', '.join(f'{name}.{m}' for m in missing)}")
    return sec


def _build(kind, name, fields):
    """Construct ``kind(**fields)``, naming the offending field when validation fails."""
    try:
        return kind(**fields)
    except InputError as exc:
        msg = str(exc)
        culprit = next((k for k in fields if k in msg), None)
        where = f"{name}.{culprit}" if culprit else name
        raise InputError(f"config: invalid {where}: {msg}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"config: invalid {name}: {exc}") from None


def config_from_dict(raw: dict, source: str = "<dict>") -> RunConfig:
    """Validate a configuration mapping."""
    if not isinstance(raw, dict):
        raise InputError("config: top level must be an object")
    unknown = sorted(set(raw) - {"prior", "costs", "search", "outputs"})
    if unknown:
        raise InputError(f"config: unknown section(s) {', '.join(unknown)}")
    prior = _build(PriorSpec, "prior", _section(raw, "prior", PRIOR_KEYS, True))
    costs = _build(CostModel, "costs", _section(raw, "costs", COST_KEYS, True))
    search = _build(SearchOptions, "search", _section(raw, "search", SEARCH_KEYS, False))
    if costs.J != prior.J:
        raise InputError(f"config: costs.c_lin has {costs.J} causes but prior.dir_alphas has {prior.J}")
    outputs = raw.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise InputError("config: 'outputs' must be an object")
    return RunConfig(prior, costs, search, outputs, source)


def load_config(path: str) -> RunConfig:
    """Read a JSON config from ``path``, or a bundled one by name (``example1``, ``example2``)."""
    if path in BUNDLED:
        text = resources.files("bsplan").joinpath("configs", f"{path}.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(raw, path)


# ---------------------------------------------------------------------------
# plans, counts and report formatting


def plan_from_args(args) -> SamplingPlan:
    if args.n is None:
        raise InputError("a plan needs --n together with --h/--k or --epochs")
    if args.n == 0:
        return SamplingPlan.no_sampling()
    if args.epochs is not None:
        if args.h is not None or args.k is not None:
            raise InputError("give either --epochs or --h/--k, not both")
        try:
            epochs = [float(x) for x in args.epochs.split(",") if x.strip()]
        except ValueError:
            raise InputError(f"--epochs must be a comma-separated list of numbers, got {args.epochs!r}") from None
        return SamplingPlan(args.n, epochs)
    if args.h is None or args.k is None:
        raise InputError("an equal-interval plan needs both --h and --k")
    return SamplingPlan.equal(args.n, args.h, args.k)


def plan_to_dict(plan: SamplingPlan) -> dict:
    if plan.is_no_sampling:
        return {"n": 0, "h": 0.0, "k": 0, "epochs": []}
    h = plan.h if plan.is_equal_interval else None
    return {"n": plan.n, "h": h, "k": plan.k, "epochs": list(plan.epochs)}


def plan_from_dict(d: dict) -> SamplingPlan:
    if int(d.get("n", 0)) == 0:
        return SamplingPlan.no_sampling()
    if d.get("h") is not None:
        return SamplingPlan.equal(int(d["n"]), float(d["h"]), int(d["k"]))
    return SamplingPlan(int(d["n"]), d["epochs"])


def read_counts(path: str, plan: SamplingPlan, J: int) -> IntervalData:
    """Read a counts CSV with header ``interval,cause_1,...,cause_J``.

    Rows are inspections in time order; a test that ended early omits its
    trailing rows.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read counts file {path}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty counts file")
    header = [c.strip() for c in rows[0]]
    expected = ["interval"] + [f"cause_{j}" for j in range(1, J + 1)]
    if header != expected:
        raise InputError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
    body = rows[1:]
    if len(body) > plan.k:
        raise InputError(f"{path}: {len(body)} inspection rows but the plan has k={plan.k}")
    counts = []
    for line, row in enumerate(body, start=2):
        if len(row) != J + 1:
            raise InputError(f"{path}, line {line}: expected {J + 1} columns, got {len(row)}")
        try:
            vals = [int(c) for c in row]
        except ValueError:
            raise InputError(f"{path}, line {line}: counts must be integers") from None
        if vals[0] != line - 1:
            raise InputError(f"{path}, line {line}: interval {vals[0]} out of order, expected {line - 1}")
        counts.append(vals[1:])
    try:
        data = IntervalData(np.array(counts, dtype=int).reshape(len(counts), J), plan.n)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    return data.padded(plan.k)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}" if abs(v) < 1e-3 and v != 0 else f"{v:.6f}".rstrip("0").rstrip(".")
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    if v is None:
        return "-"
    return str(v)


def text_summary(report: dict) -> str:
    """Aligned ``key : value`` lines for the human reader."""
    lines = []

    def walk(prefix, obj):
        for key, val in obj.items():
            if key == "config":
                continue
            name = f"{prefix}{key}"
            if isinstance(val, dict):
                walk(name + ".", val)
            else:
                lines.append((name, _fmt(val)))

    walk("", report)
    width = max(len(k) for k, _ in lines)
    return "\n".join(f"{k.ljust(width)} : {v}" for k, v in lines)


def emit(report: dict, out: str | None, stream=None):
    stream = stream or sys.stdout
    if out:
        Path(out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    stream.write(text_summary(report) + "\n")


def _rule_dict(rule: DecisionRule) -> dict:
    return {"kind": rule.kind, "r0": rule.r0}


# ---------------------------------------------------------------------------
# commands


def _search_opts(cfg: RunConfig, args) -> SearchOptions:
    opts = cfg.search
    if getattr(args, "threads", None):
        opts = SearchOptions(**{**{k: getattr(opts, k) for k in SEARCH_KEYS}, "threads": args.threads})
    return opts


def design(cfg: RunConfig, kind: str, opts: SearchOptions | None = None) -> dict:
    """Optimal plan and rule for ``kind`` in ``bayes``, ``reliability`` or ``approx``."""
    opts = opts or cfg.search
    if kind == "approx":
        res = optimize_plan_approx(cfg.prior, cfg.costs, opts)
    else:
        res = optimize_plan(kind, cfg.prior, cfg.costs, opts)
    out = {
        "command": "design",
        "decision": kind,
        "plan": plan_to_dict(res.plan),
        "rule": _rule_dict(res.rule),
        "no_sampling": res.plan.is_no_sampling,
        "risk": res.report.as_dict(),
    }
    if res.threshold_interval is not None:
        out["threshold_interval"] = list(res.threshold_interval)
    out["config"] = cfg.as_dict()
    return out


def evaluate(cfg: RunConfig, plan: SamplingPlan, kind: str, r0: float | None) -> dict:
    """Risk report of a given plan and rule."""
    prior, costs = cfg.prior, cfg.costs
    threshold = None
    if plan.is_no_sampling:
        report = no_sampling_report(prior, costs)
        rule = DecisionRule.bayes() if kind == "bayes" else DecisionRule.reliability(
            r0 if r0 is not None else (0.0 if report.p_accept == 1.0 else 1.0))
    elif kind == "bayes":
        rule = DecisionRule.bayes()
        report = bayes_risk(plan, rule, prior, costs)
    elif kind == "reliability":
        ev = PlanEvaluator(plan, prior, costs)
        if r0 is None:
            t = ev.optimal_threshold()
            r0, threshold = t.r0, [t.lo, t.hi]
        rule = DecisionRule.reliability(r0)
        report = ev.report(*ev.reliability_penalty(r0))
    else:
        if r0 is None:
            raise InputError("--decision approx needs --r0")
        rule = DecisionRule.reliability(r0)
        ev = PlanEvaluator(plan, prior, costs)
        approx = approx_bayes_risk_quad(plan, r0, prior, costs)
        _, pacc = ev.reliability_penalty(r0)
        report = assemble_report(plan, costs, ev.expected_counts(), approx - ev.base_cost(), pacc)
    out = {"command": "evaluate", "decision": kind, "plan": plan_to_dict(plan), "rule": _rule_dict(rule),
           "risk": report.as_dict()}
    if threshold is not None:
        out["threshold_interval"] = threshold
    out["config"] = cfg.as_dict()
    return out


def decide(cfg: RunConfig, plan: SamplingPlan, data: IntervalData, kind: str, r0: float | None) -> dict:
    """Estimates, posterior cost and verdict for observed counts."""
    if plan.is_no_sampling:
        raise InputError("decide needs a plan with n >= 1")
    if kind in ("reliability", "approx") and r0 is None:
        raise InputError("the reliability rule needs --r0")
    costs = cfg.costs
    est = fit_total_rate(plan, data)
    r_hat = est.reliability(costs.t0)
    ph = phi(plan, data, cfg.prior, costs)
    if kind == "bayes":
        accept = ph <= costs.c_reject
    else:
        accept = r_hat > r0
    return {
        "command": "decide",
        "decision": kind,
        "plan": plan_to_dict(plan),
        "counts": data.counts.tolist(),
        "nu_hat": {"total": est.total, "per_cause": list(est.per_cause)},
        "r_hat": r_hat,
        "phi": ph,
        "c_reject": costs.c_reject,
        "r0": r0,
        "no_failure_fallback": est.used_fallback,
        "unbounded_estimate": est.unbounded,
        "verdict": "accept" if accept else "reject",
    }


def simulate(cfg: RunConfig, plan: SamplingPlan, kind: str, r0: float | None, reps: int, seed: int,
             threads: int = 1) -> dict:
    """Empirical operating characteristics under the prior."""
    if plan.is_no_sampling:
        raise InputError("simulate needs a plan with n >= 1")
    if reps < 1:
        raise InputError("--reps must be >= 1")
    if kind == "bayes":
        rule = DecisionRule.bayes()
    else:
        if r0 is None:
            r0 = PlanEvaluator(plan, cfg.prior, cfg.costs).optimal_threshold().r0
        rule = DecisionRule.reliability(r0)
    oc = empirical_oc(plan, rule, cfg.prior, reps, seed, costs=cfg.costs, threads=threads)
    se_defined = reps > 1
    return {
        "command": "simulate",
        "decision": kind,
        "plan": plan_to_dict(plan),
        "rule": _rule_dict(rule),
        "reps": reps,
        "seed": seed,
        "se_defined": se_defined,
        "oc": {name: {"mean": m, "se": s if se_defined else None} for name, (m, s) in oc.items()},
    }


# ---------------------------------------------------------------------------
# tables


DESIGN_COLUMNS = ["type", "n", "h", "k", "r0", "p_accept", "e_failures", "e_duration", "e_inspections", "risk"]
TABLE8_DATA = [
    [[0, 0], [0, 0], [0, 1]],
    [[0, 0], [0, 0], [0, 0]],
    [[0, 0], [1, 0], [2, 1]],
    [[1, 1], [1, 0], [1, 0]],
    [[2, 0], [2, 0]],
    [[2, 1], [0, 0], [0, 1]],
]
TABLE8_R0 = 0.76


def _tidy(h):
    """Strip floating-point noise from grid values such as ``0.41000000000000003``."""
    return None if h is None else round(h, 10)


def _design_row(cfg: RunConfig, kind: str, label: str, opts: SearchOptions) -> dict:
    rep = design(cfg, kind, opts)
    p, r = rep["plan"], rep["risk"]
    return {"type": label, "n": p["n"], "h": _tidy(p["h"]), "k": p["k"], "r0": rep["rule"]["r0"],
            "p_accept": r["p_accept"], "e_failures": r["e_failures"], "e_duration": r["e_duration"],
            "e_inspections": r["e_inspections"], "risk": r["total_risk"]}


def _both_types(cfg, opts, lead=None):
    rows = []
    for kind, label in (("bayes", "I"), ("reliability", "II")):
        row = _design_row(cfg, kind, label, opts)
        rows.append({**(lead or {}), **row})
    return rows


def _sweep(cfg, opts, name, values, setter):
    rows = []
    for v in values:
        rows += _both_types(setter(cfg, v), opts, {name: v})
    return rows


def _approx_row(cfg, opts, lead):
    rep = design(cfg, "approx", opts)
    p, r = rep["plan"], rep["risk"]
    row = {**lead, "n": p["n"], "h": _tidy(p["h"]), "k": p["k"], "r0": rep["rule"]["r0"], "p_accept": r["p_accept"],
           "e_failures": r["e_failures"], "e_duration": r["e_duration"], "e_inspections": r["e_inspections"],
           "risk": r["total_risk"]}
    if p["n"] > 0:
        plan = plan_from_dict(p)
        est, se = approx_bayes_risk(plan, rep["rule"]["r0"], cfg.prior, cfg.costs, opts.mc_draws,
                                    np.random.default_rng(opts.seed), return_se=True)
        row.update(mc_risk=est, mc_se=se, mc_seed=opts.seed, mc_draws=opts.mc_draws)
    return row


def build_table(which: str, ex1: RunConfig, ex2: RunConfig, opts1: SearchOptions,
                opts2: SearchOptions) -> tuple[list[str], list[dict]]:
    """Columns and rows of one reproduced table."""
    if which == "1":
        return DESIGN_COLUMNS, _both_types(ex1, opts1)
    if which == "2":
        return ["c_reject"] + DESIGN_COLUMNS, _sweep(ex1, opts1, "c_reject", [20, 30, 50, 60, 70, 90],
                                                     lambda c, v: c.with_costs(c_reject=v))
    if which == "3":
        return ["c_inspect"] + DESIGN_COLUMNS, _sweep(ex1, opts1, "c_inspect", [0.0, 0.2, 0.3, 1.0],
                                                      lambda c, v: c.with_costs(c_inspect=v))
    if which == "4":
        return ["c_time"] + DESIGN_COLUMNS, _sweep(ex1, opts1, "c_time", [0.0, 0.1, 0.5, 1.0],
                                                   lambda c, v: c.with_costs(c_time=v))
    if which == "5":
        rows = []
        for v in (0.5, 0.75, 1.25, 1.5):
            rows += _both_types(ex1.with_prior(eta=v), opts1, {"parameter": "eta", "value": v})
        for v in (2.2, 2.5, 3.0, 3.3):
            rows += _both_types(ex1.with_prior(alpha=v), opts1, {"parameter": "alpha", "value": v})
        return ["parameter", "value"] + DESIGN_COLUMNS, rows
    mc_cols = ["mc_risk", "mc_se", "mc_seed", "mc_draws"]
    approx_cols = ["n", "h", "k", "r0", "p_accept", "e_failures", "e_duration", "e_inspections", "risk"]
    if which == "6":
        rows = []
        for cs in (0.12, 0.15, 0.18):
            for ci in (0.01, 0.05, 0.1):
                rows.append(_approx_row(ex2.with_costs(c_sample=cs, c_inspect=ci), opts2,
                                        {"c_sample": cs, "c_inspect": ci}))
        return ["c_sample", "c_inspect"] + approx_cols + mc_cols, rows
    if which == "7":
        return approx_cols + mc_cols, [_approx_row(ex2, opts2, {})]
    if which == "8":
        plan = SamplingPlan.equal(4, 0.3, 3)
        rows = []
        for i, d in enumerate(TABLE8_DATA, start=1):
            data = IntervalData(np.array(d), plan.n).padded(plan.k)
            r = decide(ex1, plan, data, "reliability", TABLE8_R0)
            rows.append({"i": i, "data": json.dumps(d).replace(" ", ""), "r_hat": r["r_hat"], "phi": r["phi"],
                         "type_I": "accept" if r["phi"] <= ex1.costs.c_reject else "reject",
                         "type_II": r["verdict"]})
        return ["i", "data", "r_hat", "phi", "type_I", "type_II"], rows
    raise InputError(f"unknown table {which!r}; choose 1-8 or all")


def write_csv(columns, rows, stream):
    w = csv.DictWriter(stream, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})


def tables(which: str, out: str | None, threads: int = 1, config_dir: str | None = None, stream=None):
    stream = stream or sys.stdout
    selected = [str(i) for i in range(1, 9)] if which == "all" else [which]
    for w in selected:
        if w not in {str(i) for i in range(1, 9)}:
            raise InputError(f"unknown table {w!r}; choose 1-8 or all")
    base = Path(config_dir) if config_dir else None
    ex1 = load_config(str(base / "example1.json")) if base else load_config("example1")
    ex2 = load_config(str(base / "example2.json")) if base else load_config("example2")
    opts1 = SearchOptions(**{**{k: getattr(ex1.search, k) for k in SEARCH_KEYS}, "threads": threads})
    opts2 = SearchOptions(**{**{k: getattr(ex2.search, k) for k in SEARCH_KEYS}, "threads": threads})
    for w in selected:
        columns, rows = build_table(w, ex1, ex2, opts1, opts2)
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
            with open(Path(out) / f"table{w}.csv", "w", newline="") as fh:
                write_csv(columns, rows, fh)
            stream.write(f"wrote {Path(out) / f'table{w}.csv'}\n")
        else:
            if len(selected) > 1:
                stream.write(f"# table {w}\n")
            write_csv(columns, rows, stream)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bsplan", description="Bayesian sampling plans for interval-censored "
                                "competing-risks life tests.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, plan=True, decision=True):
        sp.add_argument("--config", default="example1",
                        help="JSON config path, or a bundled name: example1, example2 (default example1)")
        sp.add_argument("--out", help="write the JSON report to this path")
        sp.add_argument("--threads", type=int, default=1)
        if decision:
            sp.add_argument("--decision", choices=["bayes", "reliability", "approx"], default="bayes")
            sp.add_argument("--r0", type=float, help="reliability threshold")
        if plan:
            sp.add_argument("--n", type=int)
            sp.add_argument("--h", type=float)
            sp.add_argument("--k", type=int)
            sp.add_argument("--epochs", help="comma-separated inspection times, instead of --h/--k")

    common(sub.add_parser("design", help="find the optimal plan"), plan=False)
    ev = sub.add_parser("evaluate", help="Bayes risk of a plan")
    common(ev)
    ev.add_argument("--report", help="take the plan, rule and config from a design report")
    dc = sub.add_parser("decide", help="accept or reject a lot from observed counts")
    common(dc)
    dc.add_argument("--data", required=True, help="counts CSV: interval,cause_1,...,cause_J")
    sm = sub.add_parser("simulate", help="empirical operating characteristics")
    common(sm)
    sm.add_argument("--reps", type=int, default=100_000)
    sm.add_argument("--seed", type=int, default=0)
    tb = sub.add_parser("tables", help="reproduce the published tables as CSV")
    tb.add_argument("which", help="table number 1-8, or all")
    tb.add_argument("--config", dest="config_dir", help="directory holding example1.json and example2.json")
    tb.add_argument("--out", help="directory for tableN.csv files (default: print to stdout)")
    tb.add_argument("--threads", type=int, default=1)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        raise InputError("--threads must be >= 1")
    if args.command == "tables":
        tables(args.which, args.out, args.threads, args.config_dir)
        return EXIT_OK
    if args.command == "evaluate" and args.report:
        try:
            rep = json.loads(Path(args.report).read_text())
            cfg = config_from_dict(rep["config"], args.report)
            plan = plan_from_dict(rep["plan"])
            kind, r0 = rep["decision"], rep["rule"]["r0"]
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot use report {args.report}: {exc}") from None
        emit(evaluate(cfg, plan, kind, r0), args.out)
        return EXIT_OK
    cfg = load_config(args.config)
    if args.command == "design":
        emit(design(cfg, args.decision, _search_opts(cfg, args)), args.out)
        return EXIT_OK
    plan = plan_from_args(args)
    if args.command == "evaluate":
        report = evaluate(cfg, plan, args.decision, args.r0)
    elif args.command == "decide":
        report = decide(cfg, plan, read_counts(args.data, plan, cfg.prior.J), args.decision, args.r0)
    else:
        report = simulate(cfg, plan, args.decision, args.r0, args.reps, args.seed, args.threads)
    emit(report, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:
        # argparse reports usage errors with status 2
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    except (InputError, EnumerationCapExceeded) as exc:
        print(f"bsplan: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BsplanError, FloatingPointError, ArithmeticError) as exc:
        print(f"bsplan: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
