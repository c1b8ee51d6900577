"""``prophet-lab`` command line entry point.

Every subcommand reads a JSON config (``--config``) naming an instance file
and writes JSON or CSV to ``--out`` (default: standard output).  Exit codes:
0 on success, 2 on validation errors, 3 on capacity errors, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from ..allocation import optimal_allocation
from ..errors import CapacityError, ParameterError, ProphetLabError, ValidationError
from ..fixedpoint import best_fixed_point, find_fixed_point, verify_constant_bound
from ..mechanisms import PROFILE_CAP, check_balanced, supporting_clause_prices
from ..rsg import mirror_sides_exact, mirror_sides_mc
from ..stats import substream
from ..subgood import solve_subgood, verify_subgood
from ..valuations import full_set, itemset
from .experiment import (
    INFINITE,
    REPORT_COLUMNS,
    UNDEFINED,
    ExperimentConfig,
    estimate_opt_mc,
    estimate_ratio,
    load_config,
    run_suite,
    to_csv,
)
from .io import load_instance, load_irsg, read_json

COMMANDS = ("simulate", "opt", "mirror-check", "balance-check", "subgood", "fixed-point", "suite")


class Output:
    """A command result: a JSON document plus the table used for CSV output."""

    def __init__(self, doc: Any, rows: list[dict], columns: tuple[str, ...]):
        self.doc, self.rows, self.columns = doc, rows, columns

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return to_csv(self.rows, self.columns)
        return json.dumps(jsonable(self.doc), indent=2, allow_nan=False) + "\n"


def jsonable(x: Any) -> Any:
    """Plain JSON types, with non-finite floats replaced by markers."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return UNDEFINED
        if math.isinf(x):
            return INFINITE if x > 0 else "-" + INFINITE
        return x
    return x


def _kv_rows(doc: dict) -> tuple[list[dict], tuple[str, ...]]:
    flat = {k: v for k, v in jsonable(doc).items() if not isinstance(v, (dict, list))}
    return [{"key": k, "value": v} for k, v in flat.items()], ("key", "value")


class _Text(Output):
    """Pre-rendered output (the suite table is always CSV)."""

    def __init__(self, text: str):
        super().__init__(None, [], ())
        self.text = text

    def render(self, fmt: str) -> str:
        return self.text


def cmd_simulate(cfg: ExperimentConfig, args) -> Output:
    report = estimate_ratio(cfg)
    row = report.to_dict()
    return Output(row, [row], REPORT_COLUMNS)


def cmd_opt(cfg: ExperimentConfig, args) -> Output:
    inst = load_instance(cfg.instance, cfg.check_class)
    if cfg.mode == "monte-carlo":
        stats = estimate_opt_mc(cfg, inst)
        doc = {"e_opt": stats.mean, "e_opt_half_width": stats.half_width,
               "samples": cfg.samples, "seed": cfg.seed}
        return Output(doc, [doc], tuple(doc))
    if inst.num_profiles > PROFILE_CAP:
        raise CapacityError(f"{inst.num_profiles} profiles exceeds the cap {PROFILE_CAP}; use monte-carlo mode")
    rows, total = [], 0.0
    for prob, idx, vals in inst.profiles():
        res = optimal_allocation(vals)
        total += prob * res.value
        rows.append({"support_index": " ".join(map(str, idx)), "prob": prob,
                     "allocation": " ".join(map(str, res.allocation)), "value": res.value})
    doc = {"e_opt": total, "profiles": [
        {"support_index": [int(k) for k in r["support_index"].split()], "prob": r["prob"],
         "allocation": [int(s) for s in r["allocation"].split()], "value": r["value"]} for r in rows]}
    return Output(doc, rows, ("support_index", "prob", "allocation", "value"))


def cmd_mirror(cfg: ExperimentConfig, args) -> Output:
    if cfg.irsg is None:
        raise ValidationError("mirror-check needs an 'irsg' file in the config")
    inst = load_instance(cfg.instance, cfg.check_class)
    g = load_irsg(cfg.irsg, inst)
    if cfg.mode == "exact":
        sides = mirror_sides_exact(inst, g, cfg.order)
        doc = {"mode": "exact", "lhs": sides.lhs, "rhs": sides.rhs, "holds": sides.holds}
    else:
        est = mirror_sides_mc(inst, g, cfg.samples, substream(cfg.seed, 0), cfg.order)
        doc = {"mode": "monte-carlo", "seed": cfg.seed, "samples": cfg.samples, "lhs": est.lhs,
               "lhs_half_width": est.lhs_half_width, "rhs": est.rhs, "rhs_half_width": est.rhs_half_width}
    return Output(doc, [doc], tuple(doc))


def cmd_balance(cfg: ExperimentConfig, args) -> Output:
    inst = load_instance(cfg.instance, cfg.check_class)
    alpha = float(cfg.extra.get("alpha", 1.0))
    beta = float(cfg.extra.get("beta", 1.0))
    if inst.num_profiles > PROFILE_CAP:
        raise CapacityError(f"{inst.num_profiles} profiles exceeds the cap {PROFILE_CAP}")
    rows = []
    for prob, idx, vals in inst.profiles():
        prices = np.asarray(cfg.prices) if cfg.prices is not None else supporting_clause_prices(vals)
        rep = check_balanced(vals, prices, alpha, beta)
        rows.append({"support_index": " ".join(map(str, idx)), "prob": prob,
                     "prices": " ".join(repr(float(p)) for p in prices), "balanced": rep.balanced,
                     "cond1_ok": rep.cond1_ok, "cond2_ok": rep.cond2_ok,
                     "cond1_slack": rep.cond1_slack, "cond2_slack": rep.cond2_slack})
    doc = {"alpha": alpha, "beta": beta, "all_balanced": all(r["balanced"] for r in rows), "profiles": rows}
    return Output(doc, rows, ("support_index", "prob", "prices", "balanced", "cond1_ok", "cond2_ok",
                              "cond1_slack", "cond2_slack"))


def cmd_subgood(cfg: ExperimentConfig, args) -> Output:
    inst = load_instance(cfg.instance, cfg.check_class)
    i = int(cfg.extra.get("bidder", 0))
    k = int(cfg.extra.get("support", 0))
    if not 0 <= i < inst.n or not 0 <= k < inst.bidders[i].size:
        raise ValidationError(f"no support valuation {k} for bidder {i}")
    v = inst.bidders[i].valuations[k]
    bundle = cfg.extra.get("bundle")
    U = full_set(inst.m) if bundle is None else itemset(*bundle)
    sol = solve_subgood(v, U, int(cfg.extra.get("resolution", 21)))
    doc = dict(sol.to_dict(), bidder=i, support=k, slack=verify_subgood(sol, v))
    rows, cols = _kv_rows(doc)
    return Output(doc, rows, cols)


def cmd_fixed_point(cfg: ExperimentConfig, args) -> Output:
    inst = load_instance(cfg.instance, cfg.check_class)
    eps = args.epsilon if args.epsilon is not None else cfg.extra.get("epsilon")
    if eps is None:
        raise ValidationError("fixed-point needs --epsilon or an 'epsilon' config entry")
    eps = float(eps)
    max_iters = args.max_iters if args.max_iters is not None else int(cfg.extra.get("max_iters", 10_000))
    tol = args.tolerance if args.tolerance is not None else float(cfg.extra.get("tolerance", 1e-6))
    search = cfg.extra.get("search", "dynamics")
    if search == "dynamics":
        res = find_fixed_point(inst, eps, max_iters, tol, init=cfg.extra.get("init", "zero"))
    elif search == "welfare":
        res = best_fixed_point(inst, eps, int(cfg.extra.get("starts", 8)), cfg.seed, tol)
    else:
        raise ParameterError(f"search must be 'dynamics' or 'welfare', got {search!r}")
    doc = res.to_dict()
    if res.converged:
        theorem_eps = float(cfg.extra.get("theorem_epsilon", eps))
        rep = verify_constant_bound(inst, res.x, theorem_eps, eps, tol)
        doc["certificate"] = {
            "epsilon": rep.epsilon, "delta": rep.delta, "e_alg": rep.e_alg, "e_opt": rep.e_opt,
            "ratio": rep.ratio if rep.ratio is not None else UNDEFINED,
            "bound_ok": rep.bound_ok, "delta_bound": rep.delta_bound,
            "delta_consistent": rep.delta_consistent, "chain": rep.chain,
        }
    rows = [{"iteration": t + 1, "residual": r} for t, r in enumerate(res.log)]
    return Output(doc, rows, ("iteration", "residual"))


def cmd_suite(path: Path, args) -> Output:
    data = read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get("instances"), list):
        raise ValidationError("suite config needs an 'instances' list")
    mechanisms = data.get("mechanisms", ["single-item"])
    defaults = {k: v for k, v in data.items() if k not in ("instances", "mechanisms", "out", "format")}
    for key, value in (("seed", args.seed), ("samples", args.samples), ("workers", args.workers)):
        if value is not None:
            defaults[key] = value
    if args.samples is not None:
        defaults["mode"] = "monte-carlo"
    text = run_suite(data["instances"], defaults, mechanisms, base=path.parent)
    return _Text(text)


HANDLERS = {
    "simulate": cmd_simulate,
    "opt": cmd_opt,
    "mirror-check": cmd_mirror,
    "balance-check": cmd_balance,
    "subgood": cmd_subgood,
    "fixed-point": cmd_fixed_point,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prophet-lab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int, help="switch to monte-carlo mode with this many samples")
    parser.add_argument("--out", type=Path)
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--workers", type=int)
    parser.add_argument("--epsilon", type=float, help="fixed-point grid step")
    parser.add_argument("--max-iters", type=int)
    parser.add_argument("--tolerance", type=float)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            out, fmt = cmd_suite(args.config, args), "csv"
            target = args.out
        else:
            mode = "monte-carlo" if args.samples is not None else None
            cfg = load_config(args.config, seed=args.seed, samples=args.samples, mode=mode,
                              format=args.format, workers=args.workers)
            out = HANDLERS[args.command](cfg, args)
            fmt, target = cfg.format, args.out or cfg.out
        text = out.render(fmt)
        if target is None:
            sys.stdout.write(text)
        else:
            Path(target).write_text(text, encoding="utf-8", newline="\n")
    except CapacityError as exc:
        print(f"prophet-lab: capacity error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"prophet-lab: validation error: {exc}", file=sys.stderr)
        return 2
    except ProphetLabError as exc:
        print(f"prophet-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


__all__ = ["COMMANDS", "build_parser", "jsonable", "main", "run"]


if __name__ == "__main__":
    sys.exit(main())
