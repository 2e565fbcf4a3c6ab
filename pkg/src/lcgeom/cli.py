"""Command line front end: ``lcgeom validate|run|compute|check``.

A config is a JSON object::

    {
      "seed": 42,
      "budget": 20000,
      "tolerances": {"resolution": 0.05},
      "functions": {"g2": {"variant": "gaussian", "dim": 2, ...}},
      "tasks": [
        {"compute": "quermassintegral", "f": "g2", "j": 1},
        {"check": "t3", "inputs": ["g2", "g2"], "params": {"k": 1}},
        {"suite": "paper-core"}
      ]
    }

Exit codes: 0 ok, 1 a check failed or a task errored, 2 config error,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import multiprocessing
import os
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import functionals as F
from . import harness, suite
from .exceptions import LcgeomError
from .funcrep import from_spec, sup_norm
from .quad import Estimate, lp_norm

log = logging.getLogger("lcgeom")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
COMPUTE_COLUMNS = ["task", "functional", "function", "args", "value", "stderr", "method", "samples", "seed"]


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    path: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.path}: {self.message}"


# ---------------------------------------------------------------- computations


def _c_lp_norm(f, args, budget, stream):
    return lp_norm(f, args.get("p", 1.0), budget, stream)


def _c_sup_norm(f, args, budget, stream):
    return Estimate(sup_norm(f)[0], 0.0, 0, "closed_form")


def _c_quermassintegral(f, args, budget, stream):
    return F.quermassintegral(f, int(args["j"]), budget, stream)


def _c_variation(f, args, budget, stream):
    return F.variation(f, budget, stream, args.get("direction"))


def _c_irat(f, args, budget, stream):
    return F.irat(f, budget, stream)


def _c_john(f, args, budget, stream):
    john = F.john_function(f)
    return Estimate(john.a, 0.0, 0, "closed_form"), {
        "a": john.a, "center": john.center, "volume": john.volume, "B": john.B,
        "feasibility": john.probe_feasibility(f),
    }


def _c_isotropic_constant(f, args, budget, stream):
    return F.isotropic_constant(f, budget, stream)


def _c_section_power_mean(f, args, budget, stream):
    raw, phi = F.section_power_mean(f, int(args["k"]), budget, stream)
    return phi, {"raw": raw}


def _c_steiner(f, args, budget, stream):
    fit = F.steiner_fit(f, args.get("deltas"), budget, stream, reference=bool(args.get("reference", True)))
    extra = {"coefficients": fit.coefficients, "coefficient_stderr": fit.coefficient_stderr,
             "reference": [r.to_dict() for r in fit.reference]}
    return Estimate(float(fit.coefficients[0]), float(fit.coefficient_stderr[0]), 0, "mc_box"), extra


COMPUTATIONS = {
    "lp_norm": (_c_lp_norm, ()),
    "sup_norm": (_c_sup_norm, ()),
    "quermassintegral": (_c_quermassintegral, ("j",)),
    "variation": (_c_variation, ()),
    "irat": (_c_irat, ()),
    "john_function": (_c_john, ()),
    "isotropic_constant": (_c_isotropic_constant, ()),
    "section_power_mean": (_c_section_power_mean, ("k",)),
    "steiner_fit": (_c_steiner, ()),
}


# ---------------------------------------------------------------- validation


def _load_json(path):
    """Parse JSON, turning syntax errors into a positioned diagnostic."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return None, [Diagnostic("error", str(path), f"cannot read: {exc.strerror}")]
    try:
        return json.loads(text), []
    except json.JSONDecodeError as exc:
        return None, [Diagnostic("error", f"{path}:{exc.lineno}:{exc.colno}", exc.msg)]


def validate(config) -> list[Diagnostic]:
    """All violations of the config invariants, without running anything."""
    out: list[Diagnostic] = []
    if not isinstance(config, dict):
        return [Diagnostic("error", "$", "config must be a JSON object")]
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        out.append(Diagnostic("error", "$.seed", "seed must be an integer in [0, 2^64)"))
    budget = config.get("budget", harness.DEFAULT_BUDGET)
    if not isinstance(budget, int) or isinstance(budget, bool) or budget <= 0:
        out.append(Diagnostic("error", "$.budget", "budget must be a positive integer"))
    tol = config.get("tolerances", {})
    if not isinstance(tol, dict):
        out.append(Diagnostic("error", "$.tolerances", "must be an object"))
    elif "resolution" in tol and not (isinstance(tol["resolution"], (int, float)) and tol["resolution"] >= 0):
        out.append(Diagnostic("error", "$.tolerances.resolution", "must be a nonnegative number"))
    functions = config.get("functions", {})
    names = set()
    if not isinstance(functions, dict):
        out.append(Diagnostic("error", "$.functions", "must be an object mapping names to specs"))
        functions = {}
    for name, spec in functions.items():
        try:
            from_spec(spec)
            names.add(name)
        except (LcgeomError, KeyError, TypeError, ValueError) as exc:
            out.append(Diagnostic("error", f"$.functions.{name}", _describe(exc)))
    tasks = config.get("tasks")
    if tasks is None or (isinstance(tasks, list) and not tasks):
        out.append(Diagnostic("warning", "$.tasks", "no tasks to run"))
        tasks = []
    if not isinstance(tasks, list):
        out.append(Diagnostic("error", "$.tasks", "must be a list"))
        tasks = []
    builtin = any(isinstance(t, dict) and "suite" in t for t in tasks)
    for i, task in enumerate(tasks):
        path = f"$.tasks[{i}]"
        if not isinstance(task, dict):
            out.append(Diagnostic("error", path, "task must be an object"))
            continue
        kinds = [k for k in ("compute", "check", "suite") if k in task]
        if len(kinds) != 1:
            out.append(Diagnostic("error", path, "task needs exactly one of 'compute', 'check', 'suite'"))
            continue
        kind = kinds[0]
        if kind == "suite":
            if task["suite"] not in suite.PRESETS:
                out.append(Diagnostic("error", f"{path}.suite", f"unknown preset {task['suite']!r}"))
            continue
        if kind == "compute":
            name = task["compute"]
            if name not in COMPUTATIONS:
                out.append(Diagnostic("error", f"{path}.compute", f"unknown functional {name!r}"))
                continue
            for req in COMPUTATIONS[name][1]:
                if req not in task:
                    out.append(Diagnostic("error", f"{path}.{req}", f"{name} needs '{req}'"))
            if task.get("f") not in names and not builtin:
                out.append(Diagnostic("error", f"{path}.f", f"undefined function {task.get('f')!r}"))
            continue
        cid = task["check"]
        if cid not in harness.CHECKS:
            out.append(Diagnostic("error", f"{path}.check", f"unknown check_id {cid!r}"))
            continue
        inputs = task.get("inputs", [])
        want = harness.N_INPUTS.get(cid, 1)
        if not isinstance(inputs, list) or len(inputs) != want:
            out.append(Diagnostic("error", f"{path}.inputs", f"{cid} takes {want} function(s)"))
            continue
        for j, nm in enumerate(inputs):
            if nm not in names and not builtin:
                out.append(Diagnostic("error", f"{path}.inputs[{j}]", f"undefined function {nm!r}"))
        if not isinstance(task.get("params", {}), dict):
            out.append(Diagnostic("error", f"{path}.params", "must be an object"))
    return out


def _describe(exc):
    msg = str(exc)
    return f"{type(exc).__name__}: {msg}" if msg else type(exc).__name__


# ---------------------------------------------------------------- execution


def expand_tasks(config) -> list[dict]:
    tasks = []
    for t in config.get("tasks", []):
        if "suite" in t:
            tasks.extend(suite.suite_tasks(t["suite"]))
        else:
            tasks.append(t)
    return tasks


_WORKER: dict = {}


def _init_worker(functions, seed, budget, resolution):
    _WORKER.clear()
    _WORKER.update(functions=functions, seed=seed, budget=budget, resolution=resolution,
                   cache=harness.QuantityCache(seed, budget))


def _run_task(indexed):
    i, task = indexed
    fns, seed, budget = _WORKER["functions"], _WORKER["seed"], _WORKER["budget"]
    try:
        if "check" in task:
            params = dict(task.get("params", {}))
            params.setdefault("resolution", _WORKER["resolution"])
            inputs = [fns[nm] for nm in task.get("inputs", [])]
            rep = harness.run_check(task["check"], inputs, params, cache=_WORKER["cache"])
            rep.metadata["inputs"] = list(task.get("inputs", []))
            return i, "check", rep.to_dict(), rep.csv_row(), rep.verdict
        name = task["compute"]
        f = fns[task["f"]]
        args = {k: v for k, v in task.items() if k not in ("compute", "f")}
        stream = _WORKER["cache"].stream("compute", name, harness.fkey(f), json.dumps(args, sort_keys=True))
        res = COMPUTATIONS[name][0](f, args, budget, stream)
        est, extra = res if isinstance(res, tuple) else (res, {})
        body = {"task": i, "compute": name, "function": task["f"], "args": args,
                "estimate": est.to_dict(), "extra": harness._jsonable(extra)}
        row = [str(i), name, task["f"], json.dumps(args, sort_keys=True), harness._fmt(est.value),
               harness._fmt(est.stderr), est.method, str(est.n_samples), str(seed)]
        return i, "compute", body, row, "ok"
    except (LcgeomError, ArithmeticError, np.linalg.LinAlgError, ValueError, KeyError) as exc:
        body = {"task": i, "spec": task, "error": _describe(exc)}
        if "check" in task:
            md = {"inputs": task.get("inputs", [])}
            row = [task["check"], "", str(task.get("params", {}).get("k", "")), "", "", "", "", "error", str(seed), "0"]
            body["check_id"] = task["check"]
            body["metadata"] = md
            return i, "check", body, row, "error"
        return i, "compute", body, [str(i), task["compute"], task.get("f", ""), "", "", "", "error", "0", str(seed)], "error"


def run(config, out_dir, jobs: int = 1) -> tuple[int, Path]:
    """Execute a validated config; returns (exit status, run directory)."""
    seed = int(config.get("seed", 0))
    budget = int(config.get("budget", harness.DEFAULT_BUDGET))
    resolution = float(config.get("tolerances", {}).get("resolution", harness.RESOLUTION))
    functions = {nm: from_spec(spec) for nm, spec in config.get("functions", {}).items()}
    tasks = expand_tasks(config)
    if any("suite" in t for t in config.get("tasks", [])):
        for nm, f in suite.functions_for().items():
            functions.setdefault(nm, f)
    indexed = list(enumerate(tasks))
    if jobs > 1 and len(indexed) > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs, initializer=_init_worker, initargs=(functions, seed, budget, resolution)) as pool:
            results = pool.map(_run_task, indexed, chunksize=1)
    else:
        _init_worker(functions, seed, budget, resolution)
        results = [_run_task(t) for t in indexed]
    results.sort(key=lambda r: r[0])
    run_dir = _next_run_dir(Path(out_dir))
    checks = [r for r in results if r[1] == "check"]
    computes = [r for r in results if r[1] == "compute"]
    counts = {v: sum(1 for r in checks if r[4] == v) for v in (*harness.VERDICTS, "error")}
    report = {
        "seed": seed,
        "budget": budget,
        "counts": counts,
        "checks": [r[2] for r in checks],
        "computations": [r[2] for r in computes],
    }
    (run_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True, default=_json_default) + "\n")
    _write_csv(run_dir / "summary.csv", harness.CSV_COLUMNS, [r[3] for r in checks])
    if computes:
        _write_csv(run_dir / "computations.csv", COMPUTE_COLUMNS, [r[3] for r in computes])
    compute_errors = sum(1 for r in computes if r[4] == "error")
    log.info("checks: %s; compute errors: %d; reports in %s", counts, compute_errors, run_dir)
    bad = counts["fail"] + counts["error"] + compute_errors
    return (EXIT_FAIL if bad else EXIT_OK), run_dir


def _json_default(obj):
    return harness._jsonable(obj)


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _next_run_dir(root: Path) -> Path:
    """A fresh ``run-NNN`` directory; earlier runs are never overwritten."""
    root.mkdir(parents=True, exist_ok=True)
    i = 1
    while True:
        d = root / f"run-{i:03d}"
        try:
            d.mkdir()
            return d
        except FileExistsError:
            i += 1


# ---------------------------------------------------------------- argument parsing


def _kv(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lcgeom", description="Geometry of log-concave functions: computations and inequality checks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")

    r = sub.add_parser("run", help="run every task of a config")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="lcgeom-out")

    c = sub.add_parser("compute", help="evaluate one functional")
    c.add_argument("functional", choices=sorted(COMPUTATIONS))
    c.add_argument("--fn", required=True, help="JSON file with a function spec")
    c.add_argument("--arg", action="append", metavar="KEY=VALUE", help="functional argument (JSON value)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--budget", type=int, default=harness.DEFAULT_BUDGET)

    k = sub.add_parser("check", help="run one inequality check")
    k.add_argument("check_id")
    k.add_argument("--fn", action="append", default=[], help="JSON file with a function spec (repeat for pairs)")
    k.add_argument("--param", action="append", metavar="KEY=VALUE")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--budget", type=int, default=harness.DEFAULT_BUDGET)
    return p


def _cmd_validate(args):
    config, diags = _load_json(args.config)
    if config is not None:
        diags = validate(config)
    for d in diags:
        print(d)
    return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK


def _cmd_run(args):
    config, diags = _load_json(args.config)
    if config is not None:
        diags = validate(config)
    errors = [d for d in diags if d.level == "error"]
    for d in diags:
        print(d, file=sys.stderr)
    if errors:
        return EXIT_CONFIG
    status, run_dir = run(config, args.out, max(1, args.jobs))
    print(run_dir)
    return status


def _load_fn(path):
    spec, diags = _load_json(path)
    if diags:
        raise _ConfigError(f"{diags[0].path}: {diags[0].message}")
    try:
        return from_spec(spec)
    except (LcgeomError, KeyError, TypeError, ValueError) as exc:
        raise _ConfigError(f"{path}: {_describe(exc)}") from None


class _ConfigError(Exception):
    pass


def _cmd_compute(args):
    f = _load_fn(args.fn)
    fargs = _kv(args.arg)
    for req in COMPUTATIONS[args.functional][1]:
        if req not in fargs:
            raise _ConfigError(f"{args.functional} needs --arg {req}=...")
    cache = harness.QuantityCache(args.seed, args.budget)
    stream = cache.stream("compute", args.functional, harness.fkey(f), json.dumps(fargs, sort_keys=True))
    res = COMPUTATIONS[args.functional][0](f, fargs, args.budget, stream)
    est, extra = res if isinstance(res, tuple) else (res, {})
    print(json.dumps({"estimate": est.to_dict(), "extra": harness._jsonable(extra)}, indent=1, sort_keys=True))
    return EXIT_OK


def _cmd_check(args):
    if args.check_id not in harness.CHECKS:
        raise _ConfigError(f"unknown check_id {args.check_id!r}")
    fns = [_load_fn(p) for p in args.fn]
    want = harness.N_INPUTS.get(args.check_id, 1)
    if len(fns) != want:
        raise _ConfigError(f"{args.check_id} takes {want} function(s), got {len(fns)}")
    rep = harness.run_check(args.check_id, fns, _kv(args.param), seed=args.seed, budget=args.budget)
    print(json.dumps(rep.to_dict(), indent=1, sort_keys=True, default=_json_default))
    return EXIT_FAIL if rep.verdict == "fail" else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"validate": _cmd_validate, "run": _cmd_run, "compute": _cmd_compute, "check": _cmd_check}
    try:
        return handlers[args.command](args)
    except (_ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LcgeomError, ValueError, KeyError) as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
        return EXIT_FAIL if args.command == "check" else EXIT_CONFIG
    except Exception:  # noqa: BLE001 - last-resort guard for the exit-code contract
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
