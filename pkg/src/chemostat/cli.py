"""Command-line surface: analyze, check, simulate, sweep, falsify.

All commands consume JSON scenario files and emit JSON reports (to
stdout and optionally a file); trajectories go to CSV.  Batch only: no
interactive steering.

Exit codes:
    0  success / every selected verdict is yes
    1  checks ran but a selected verdict is no, or simulation converged
       somewhere other than predicted
    2  parse or validation failure (including degenerate scenarios)
    3  requested checker inapplicable to the scenario
    4  no convergence within the time horizon
    5  numerical failure (stiffness, lost bracket)

The environment variable CHEMOSTAT_JOBS overrides --jobs for the batch
commands.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import catalog_equilibria
from .conditions import ConditionChecker
from .errors import (
    AssumptionViolation,
    ChemostatError,
    DegenerateError,
    DomainError,
    InapplicableError,
    NumericError,
    StiffnessError,
    ValidationError,
)
from .lyapunov import eval_V, eval_Vdot, make_lyapunov_spec
from .model import GROWTH_FAMILIES, YIELD_FAMILIES
from .scenario_io import (
    ScenarioFormatError,
    load_scenario_file,
    make_provenance,
    scenario_from_dict,
    scenario_to_dict,
    write_report,
)
from .sim import detect_convergence, integrate, verify_lemma1, write_trajectory_csv

EXIT_OK = 0
EXIT_VERDICT_NO = 1
EXIT_PARSE = 2
EXIT_INAPPLICABLE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_NUMERIC = 5

_SWEEP_POINT_CAP = 4096


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioFormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InapplicableError as exc:
        print(f"inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except DegenerateError as exc:
        print(f"degenerate scenario: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except StiffnessError as exc:
        print(f"numerical failure: {exc} (last state {exc.state})", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chemostat",
        description="Competition analysis, exclusion certificates and "
        "Lyapunov-monitored simulation for chemostat models.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("-o", "--out", help="write the report here as well")
        sp.add_argument(
            "--lenient",
            action="store_true",
            help="warn about unknown scenario keys instead of rejecting them",
        )

    sp = sub.add_parser("analyze", help="break-evens, equilibria, local stability")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("check", help="run exclusion-certificate checkers")
    common(sp)
    sp.add_argument(
        "--which",
        choices=["theorem", "apw", "wl", "sm", "bw", "all"],
        default="all",
        help="which certificate to verify (default: all applicable)",
    )
    sp.add_argument("--grid-n", type=int, default=None, help="scan grid size")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="integrate and classify the outcome")
    common(sp)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)
    sp.add_argument("--lyapunov", action="store_true", help="sample V and V' along the run")
    sp.add_argument("--csv", help="write the trajectory as CSV here")
    sp.add_argument("--sample-dt", type=float, default=None,
                    help="also record uniformly spaced samples at this spacing")
    sp.add_argument("--eps", type=float, default=1e-6, help="convergence tolerance")
    sp.add_argument("--window", type=int, default=50, help="convergence sample window")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="vary template parameters on a grid")
    sp.add_argument("template", help="template scenario JSON file")
    sp.add_argument(
        "--vary",
        action="append",
        default=[],
        metavar="KEY=LO:HI:N",
        help="axis spec, e.g. s0=1.2:5:20 or species.0.removal=0.5:2:4 "
        "(repeat for a cartesian product)",
    )
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--max-points", type=int, default=_SWEEP_POINT_CAP)
    sp.add_argument("--lenient", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("falsify", help="random scenario search with outcome tally")
    sp.add_argument("config", help="sampler configuration JSON file")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=100)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("-o", "--out", help="write the summary report here")
    sp.set_defaults(func=cmd_falsify)

    return p


def _effective_jobs(requested: int) -> int:
    env = os.environ.get("CHEMOSTAT_JOBS")
    if env:
        return max(1, int(env))
    return max(1, requested)


def _emit(report: dict, out_path, quiet: bool = False) -> None:
    text = write_report(report, out_path)
    if not quiet:
        sys.stdout.write(text)


# -- report fragments ---------------------------------------------------------


def _breakeven_dict(be) -> dict:
    return {"lambda": be.lam, "mu": be.mu, "rho": be.rho}


def _equilibrium_dict(eq) -> dict:
    return {
        "kind": eq.kind,
        "species_index": eq.species_index,
        "state": list(eq.state),
        "stability": eq.stability,
        "witness": eq.witness,
        "residual": eq.residual,
    }


def _catalog_dict(catalog, sc) -> dict:
    return {
        "breakevens": [
            {"label": sp.label, **_breakeven_dict(be)}
            for sp, be in zip(sc.species, catalog.breakevens)
        ],
        "washout": _equilibrium_dict(catalog.washout),
        "survivors": [
            _equilibrium_dict(eq) if eq else None for eq in catalog.survivors
        ],
        "inhibited": [
            _equilibrium_dict(eq) if eq else None for eq in catalog.inhibited
        ],
        "degenerate": catalog.degenerate,
        "degenerate_pairs": [list(p) for p in catalog.degenerate_pairs],
        "coalescent_species": list(catalog.coalescent),
    }


def _alpha_dict(a) -> dict:
    return {
        "species_index": a.species_index,
        "label": a.label,
        "lower": a.lower,
        "upper": a.upper,
        "feasible": a.feasible,
        "witness": a.witness,
        "argmax_s": a.argmax_s,
        "argmin_s": a.argmin_s,
        "constrained": a.constrained,
    }


def _f_condition_dict(fc) -> dict | None:
    if fc is None:
        return None
    return {
        "status": fc.status,
        "violation_s": fc.violation_s,
        "violation_gap": fc.violation_gap,
        "marginal": fc.marginal,
    }


def _theorem_dict(rep) -> dict:
    return {
        "ordering_ok": rep.ordering_ok,
        "window_ok": rep.window_ok,
        "lambdas_sorted": list(rep.lambdas),
        "mu1": rep.mu1,
        "permutation": list(rep.permutation),
        "alphas": [_alpha_dict(a) for a in rep.alphas],
        "f_condition": _f_condition_dict(rep.f_condition),
        "verdict": rep.verdict,
        "predicted_limit": list(rep.predicted_limit) if rep.predicted_limit else None,
    }


def _corollary_dict(rep) -> dict:
    return {
        "name": rep.name,
        "verdict": rep.verdict,
        "window_ok": rep.window_ok,
        "alphas": [_alpha_dict(a) for a in rep.alphas],
        "f_condition": _f_condition_dict(rep.f_condition),
        "sign_changes": rep.sign_changes,
        "identity_ok": rep.identity_ok,
        "identity_max_rel_err": rep.identity_max_rel_err,
    }


# -- commands -------------------------------------------------------------------


def cmd_analyze(args) -> int:
    doc = load_scenario_file(args.scenario, lenient=args.lenient)
    sc = doc.scenario
    catalog = catalog_equilibria(sc)
    report = {
        "command": "analyze",
        "provenance": make_provenance(),
        "scenario": scenario_to_dict(sc),
        "warnings": doc.warnings,
        "catalog": _catalog_dict(catalog, sc),
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    doc = load_scenario_file(args.scenario, lenient=args.lenient)
    sc = doc.scenario
    grid_n = args.grid_n or int(doc.checker.get("grid_n", 4096))
    tie_tol = doc.checker.get("tol")
    checker = ConditionChecker(sc, grid_n=grid_n, tie_tol=tie_tol)

    which = args.which
    names = ["theorem", "apw", "wl", "sm", "bw"] if which == "all" else [which]
    results: dict[str, dict] = {}
    verdicts: list[bool] = []
    for name in names:
        try:
            if name == "theorem":
                rep = checker.theorem()
                results[name] = _theorem_dict(rep)
                verdicts.append(rep.verdict)
            elif name == "bw":
                rep = checker.butler_wolkowicz()
                results[name] = {
                    "verdict": rep.verdict,
                    "equal_removal_rates": rep.equal_removal_rates,
                    "connected": rep.connected,
                    "s0_in_union": rep.s0_in_union,
                    "intervals": [list(iv) for iv in rep.intervals],
                }
                verdicts.append(rep.verdict)
            else:
                rep = {
                    "apw": checker.corollary_apw,
                    "wl": checker.corollary_wl,
                    "sm": checker.corollary_sm,
                }[name]()
                results[name] = _corollary_dict(rep)
                verdicts.append(rep.verdict)
        except InapplicableError as exc:
            if which != "all":
                raise
            results[name] = {"applicable": False, "reason": str(exc)}

    report = {
        "command": "check",
        "which": which,
        "provenance": make_provenance(tolerances={"grid_n": grid_n}),
        "scenario": scenario_to_dict(sc),
        "warnings": doc.warnings,
        "results": results,
        "all_selected_pass": bool(verdicts) and all(verdicts),
    }
    _emit(report, args.out)
    return EXIT_OK if report["all_selected_pass"] else EXIT_VERDICT_NO


def _lyapunov_monitors(checker: ConditionChecker):
    """V and V' monitor callables (NaN outside their domain)."""
    spec = make_lyapunov_spec(checker)

    def v_monitor(t, y):
        try:
            return eval_V(spec, y)
        except DomainError:
            return math.nan

    def vdot_monitor(t, y):
        try:
            return eval_Vdot(spec, y)
        except DomainError:
            return math.nan

    return spec, {"V": v_monitor, "Vdot": vdot_monitor}


def cmd_simulate(args) -> int:
    doc = load_scenario_file(args.scenario, lenient=args.lenient)
    sc = doc.scenario
    t_end = args.t_end if args.t_end is not None else float(doc.solver.get("t_end", 200.0))
    rtol = args.rtol if args.rtol is not None else float(doc.solver.get("rtol", 1e-8))
    atol = args.atol if args.atol is not None else float(doc.solver.get("atol", 1e-10))

    catalog = catalog_equilibria(sc)
    theorem = None
    checker = None
    try:
        checker = ConditionChecker(sc)
        theorem = checker.theorem()
    except (DegenerateError, AssumptionViolation):
        pass

    monitors = {}
    lyapunov_note = None
    if args.lyapunov:
        if checker is not None and checker.window_ok:
            try:
                _, monitors = _lyapunov_monitors(checker)
            except (DomainError, AssumptionViolation) as exc:
                lyapunov_note = f"Lyapunov sampling unavailable: {exc}"
        else:
            lyapunov_note = (
                "Lyapunov sampling unavailable: leader growth window does not "
                "straddle the feed concentration"
            )

    sample_times = None
    if args.sample_dt:
        sample_times = np.arange(0.0, t_end + args.sample_dt / 2, args.sample_dt)

    try:
        traj = integrate(
            sc, t_end, rtol=rtol, atol=atol, monitors=monitors, sample_times=sample_times
        )
    except StiffnessError as exc:
        print(
            f"stiffness failure at t = {exc.t:g}; last state {exc.state}",
            file=sys.stderr,
        )
        return EXIT_NUMERIC

    conv = detect_convergence(traj, catalog, sc, eps=args.eps, window=args.window)
    lemma1 = verify_lemma1(traj, sc, breakevens=catalog.breakevens)

    if args.csv:
        write_trajectory_csv(traj, args.csv)

    predicted = list(theorem.predicted_limit) if theorem and theorem.verdict else None
    converged_to_predicted = None
    if predicted is not None and conv.converged:
        converged_to_predicted = bool(
            max(abs(a - b) for a, b in zip(conv.equilibrium.state, predicted))
            <= args.eps
        )

    report = {
        "command": "simulate",
        "provenance": make_provenance(
            tolerances={"rtol": rtol, "atol": atol, "eps": args.eps}
        ),
        "scenario": scenario_to_dict(sc),
        "warnings": doc.warnings + ([lyapunov_note] if lyapunov_note else []),
        "t_end": t_end,
        "termination": traj.termination,
        "stats": {
            "steps": traj.n_steps,
            "rejected": traj.n_rejected,
            "clamped": traj.n_clamped,
            "samples": len(traj),
        },
        "final_state": list(traj.y[-1]),
        "theorem": _theorem_dict(theorem) if theorem else None,
        "convergence": {
            "converged": conv.converged,
            "equilibrium": _equilibrium_dict(conv.equilibrium) if conv.equilibrium else None,
            "distance": conv.distance,
            "rhs_norm": conv.rhs_norm,
            "oscillating": conv.oscillating,
            "s_amplitude": conv.s_amplitude,
            "converged_to_predicted": converged_to_predicted,
        },
        "lemma1": {
            "nonnegative_ok": lemma1.nonnegative_ok,
            "bound": lemma1.bound,
            "bounded_ok": lemma1.bounded_ok,
            "hypothesis_holds": lemma1.hypothesis_holds,
            "entry_time": lemma1.entry_time,
            "s_below_feed_ok": lemma1.s_below_feed_ok,
        },
        "csv": args.csv,
    }
    _emit(report, args.out)

    if not conv.converged:
        return EXIT_NO_CONVERGENCE
    if predicted is not None:
        return EXIT_OK if converged_to_predicted else EXIT_VERDICT_NO
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------


def _parse_vary(spec: str) -> tuple[str, list[float]]:
    try:
        key, rng = spec.split("=", 1)
        lo, hi, n = rng.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ScenarioFormatError(
            f"--vary expects KEY=LO:HI:N, got {spec!r}"
        ) from None
    if n < 1:
        raise ScenarioFormatError(f"--vary needs N >= 1, got {n}")
    if n == 1:
        return key, [lo]
    return key, [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _apply_override(doc: dict, dotted: str, value: float) -> None:
    node = doc
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        if last not in node:
            raise ScenarioFormatError(f"--vary key {dotted!r} not present in template")
        node[last] = value


def _sweep_point(job: tuple) -> dict:
    """Evaluate one sweep point: certificate check plus simulation."""
    template, overrides, t_end, eps, window = job
    doc = json.loads(json.dumps(template))
    for key, value in overrides:
        _apply_override(doc, key, value)
    record: dict = {"params": {k: v for k, v in overrides}}
    try:
        parsed = scenario_from_dict(doc)
        sc = parsed.scenario
    except (ScenarioFormatError, ValidationError) as exc:
        record["status"] = "invalid"
        record["error"] = str(exc)
        return record
    try:
        checker = ConditionChecker(sc)
        theorem = checker.theorem()
        record["theorem"] = theorem.verdict
        record["window_ok"] = theorem.window_ok
        record["alphas_feasible"] = all(a.feasible for a in theorem.alphas)
        predicted = theorem.predicted_limit
    except DegenerateError as exc:
        record["status"] = "degenerate"
        record["error"] = str(exc)
        return record
    horizon = t_end if t_end is not None else float(parsed.solver.get("t_end", 200.0))
    try:
        catalog = catalog_equilibria(sc)
        traj = integrate(sc, horizon)
        conv = detect_convergence(traj, catalog, sc, eps=eps, window=window)
    except StiffnessError as exc:
        record["status"] = "stiff"
        record["error"] = str(exc)
        return record
    record["status"] = "ok"
    record["converged"] = conv.converged
    record["oscillating"] = conv.oscillating
    if conv.converged:
        eq = conv.equilibrium
        record["converged_to"] = {
            "kind": eq.kind,
            "species_index": eq.species_index,
            "state": list(eq.state),
        }
        if predicted is not None:
            record["matches_prediction"] = bool(
                max(abs(a - b) for a, b in zip(eq.state, predicted)) <= eps
            )
    return record


def cmd_sweep(args) -> int:
    with open(args.template) as fh:
        try:
            template = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(
                f"{args.template}: invalid JSON at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from None
    scenario_from_dict(template, strict=not args.lenient)  # validate the template

    axes = [_parse_vary(spec) for spec in args.vary]
    points = list(itertools.product(*[[(k, v) for v in vals] for k, vals in axes]))
    if not axes:
        points = [()]
    if len(points) > args.max_points:
        print(
            f"refusing sweep of {len(points)} points (cap {args.max_points}); "
            "raise --max-points to override",
            file=sys.stderr,
        )
        return EXIT_PARSE

    os.makedirs(args.out_dir, exist_ok=True)
    jobs = [(template, list(p), args.t_end, 1e-6, 50) for p in points]
    n_workers = _effective_jobs(args.jobs)
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_sweep_point, jobs))
    else:
        records = [_sweep_point(job) for job in jobs]

    summary = {
        "command": "sweep",
        "provenance": make_provenance(),
        "template": args.template,
        "axes": [{"key": k, "values": vals} for k, vals in axes],
        "n_points": len(points),
        "points": records,
    }
    path = os.path.join(args.out_dir, "summary.json")
    _emit(summary, path, quiet=True)
    print(path)
    return EXIT_OK


# -- falsify ---------------------------------------------------------------------


_FALSIFY_DEFAULTS = {
    "n_species": [1, 3],
    "s0": [1.0, 8.0],
    "d": [0.3, 1.5],
    "equal_removal": False,
    "removal": [0.3, 1.5],
    "growth_families": ["monod", "haldane"],
    "yield_families": ["constant"],
    "monod": {"a": [0.5, 4.0], "b": [0.2, 4.0]},
    "haldane": {"a": [0.5, 5.0], "b": [0.2, 4.0], "c": [0.5, 10.0]},
    "constant": {"Y": [0.3, 3.0]},
    "linear": {"A": [0.3, 2.0], "B": [0.0, 1.0]},
    "quadratic": {"A": [0.3, 2.0], "B": [0.0, 0.5]},
    "initial_s_rel": [0.1, 1.5],
    "initial_x": [0.05, 1.0],
    "t_end": 150.0,
    "require": "none",
}


def _load_falsify_config(path: str) -> dict:
    with open(path) as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(
                f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    unknown = sorted(set(user) - set(_FALSIFY_DEFAULTS))
    if unknown:
        raise ScenarioFormatError(f"unknown falsify config key(s) {unknown}")
    cfg = dict(_FALSIFY_DEFAULTS)
    for key, value in user.items():
        if isinstance(_FALSIFY_DEFAULTS[key], dict):
            merged = dict(_FALSIFY_DEFAULTS[key])
            merged.update(value)
            cfg[key] = merged
        else:
            cfg[key] = value
    if cfg["require"] not in ("none", "window", "theorem"):
        raise ScenarioFormatError(
            f"falsify config 'require' must be none|window|theorem, got {cfg['require']!r}"
        )
    for fam in cfg["growth_families"]:
        if fam not in GROWTH_FAMILIES:
            raise ScenarioFormatError(f"unknown growth family {fam!r}")
    for fam in cfg["yield_families"]:
        if fam not in YIELD_FAMILIES:
            raise ScenarioFormatError(f"unknown yield family {fam!r}")
    return cfg


def _sample_scenario_doc(cfg: dict, rng: np.random.Generator) -> dict:
    def u(rng_pair):
        lo, hi = rng_pair
        return float(rng.uniform(lo, hi))

    n = int(rng.integers(cfg["n_species"][0], cfg["n_species"][1] + 1))
    s0 = u(cfg["s0"])
    d = u(cfg["d"])
    species = []
    for i in range(n):
        growth_fam = str(rng.choice(cfg["growth_families"]))
        yield_fam = str(rng.choice(cfg["yield_families"]))
        growth_params = {k: u(v) for k, v in cfg[growth_fam].items()}
        if growth_fam == "haldane":
            # keep the peak below-ish the scan window for sane scenarios
            growth_params["c"] = max(growth_params["c"], growth_params["b"])
        yield_params = {k: u(v) for k, v in cfg[yield_fam].items()}
        removal = d if cfg["equal_removal"] else u(cfg["removal"])
        species.append(
            {
                "label": f"sp{i + 1}",
                "growth": {"family": growth_fam, "params": growth_params},
                "yield": {"family": yield_fam, "params": yield_params},
                "removal": removal,
            }
        )
    return {
        "version": 1,
        "s0": s0,
        "d": d,
        "species": species,
        "initial": {
            "s": s0 * u(cfg["initial_s_rel"]),
            "x": [u(cfg["initial_x"]) for _ in range(n)],
        },
    }


def _falsify_point(job: tuple) -> dict:
    doc, t_end = job
    record: dict = {"scenario": doc}
    sc = scenario_from_dict(doc).scenario
    hypotheses = {
        "degenerate": False,
        "window_ok": None,
        "alphas_feasible": None,
        "f_condition_ok": None,
        "theorem": None,
    }
    predicted = None
    lowest_index = None
    try:
        checker = ConditionChecker(sc)
        theorem = checker.theorem()
        hypotheses["window_ok"] = theorem.window_ok
        hypotheses["alphas_feasible"] = (
            all(a.feasible for a in theorem.alphas) if theorem.window_ok else None
        )
        hypotheses["f_condition_ok"] = (
            theorem.f_condition.ok if theorem.f_condition else None
        )
        hypotheses["theorem"] = theorem.verdict
        predicted = theorem.predicted_limit
        lowest_index = checker.permutation[0]
    except DegenerateError:
        hypotheses["degenerate"] = True
    record["hypotheses"] = hypotheses

    try:
        catalog = catalog_equilibria(sc)
        traj = integrate(sc, t_end, rtol=1e-7, atol=1e-9)
        conv = detect_convergence(traj, catalog, sc)
    except (StiffnessError, DegenerateError, AssumptionViolation, NumericError) as exc:
        record["outcome"] = "numeric-failure"
        record["error"] = str(exc)
        return record

    if not conv.converged:
        record["outcome"] = "non_converged"
        record["oscillating"] = conv.oscillating
    else:
        eq = conv.equilibrium
        if eq.kind == "washout":
            record["outcome"] = "washout"
        elif eq.species_index == _lowest_lambda_index(catalog, lowest_index):
            record["outcome"] = "exclusion_by_lowest"
        else:
            record["outcome"] = "exclusion_by_other"
        record["final_equilibrium"] = {
            "kind": eq.kind,
            "species_index": eq.species_index,
            "state": list(eq.state),
        }
        if predicted is not None:
            record["matches_prediction"] = bool(
                max(abs(a - b) for a, b in zip(eq.state, predicted)) <= 1e-5
            )
    return record


def _lowest_lambda_index(catalog, from_checker):
    if from_checker is not None:
        return from_checker
    lams = [be.lam for be in catalog.breakevens]
    return int(min(range(len(lams)), key=lambda k: (lams[k], k)))


def cmd_falsify(args) -> int:
    cfg = _load_falsify_config(args.config)
    rng = np.random.default_rng(args.seed)
    docs = []
    attempts = 0
    while len(docs) < args.budget:
        if attempts > 200 * max(args.budget, 1) + 500:
            raise NumericError(
                "falsify sampler exhausted its attempt budget; the requested "
                "region appears empty"
            )
        attempts += 1
        doc = _sample_scenario_doc(cfg, rng)
        try:
            sc = scenario_from_dict(doc).scenario
        except (ScenarioFormatError, ValidationError):
            continue
        if cfg["require"] != "none":
            try:
                checker = ConditionChecker(sc)
                if not checker.window_ok:
                    continue
                if cfg["require"] == "theorem" and not checker.theorem().verdict:
                    continue
            except (DegenerateError, AssumptionViolation):
                continue
        docs.append(doc)

    jobs = [(doc, float(cfg["t_end"])) for doc in docs]
    n_workers = _effective_jobs(args.jobs)
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_falsify_point, jobs))
    else:
        records = [_falsify_point(job) for job in jobs]

    outcome_tally: dict[str, int] = {}
    hypothesis_tally = {
        "degenerate": 0,
        "window_fail": 0,
        "alpha_infeasible": 0,
        "f_condition_fail": 0,
        "theorem_pass": 0,
    }
    for rec in records:
        outcome_tally[rec["outcome"]] = outcome_tally.get(rec["outcome"], 0) + 1
        hyp = rec["hypotheses"]
        if hyp["degenerate"]:
            hypothesis_tally["degenerate"] += 1
        if hyp["window_ok"] is False:
            hypothesis_tally["window_fail"] += 1
        if hyp["alphas_feasible"] is False:
            hypothesis_tally["alpha_infeasible"] += 1
        if hyp["f_condition_ok"] is False:
            hypothesis_tally["f_condition_fail"] += 1
        if hyp["theorem"]:
            hypothesis_tally["theorem_pass"] += 1

    report = {
        "command": "falsify",
        "provenance": make_provenance(seed=args.seed),
        "config": cfg,
        "budget": args.budget,
        "attempts": attempts,
        "hypothesis_tally": hypothesis_tally,
        "outcome_tally": outcome_tally,
        "samples": records,
    }
    _emit(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
