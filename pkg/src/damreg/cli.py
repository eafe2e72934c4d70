"""Command line: ``damreg {clear,regulate,sweep,verify} --scenario FILE``.

Exit codes: 0 success, 1 usage, 2 parse/validation error, 3 infeasible
clearing, 4 failed property check.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .clearing import ClearingResult, InfeasibleError, clear, settle
from .io import GRID_AXES, ScenarioError, load_scenario, write_table
from .properties import run_property_suite
from .regulation import EnvelopeError, run_regulation, standard_profit
from .strategy import REGIMES, GridSpec, best_response_sweep

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_PROPERTY = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid_overrides(text: str | None, base: GridSpec) -> GridSpec:
    """``"alpha=1,2;withhold=0,0.5"`` replaces the named axes of ``base``."""
    if not text:
        return base
    axes = dict(base.__dict__)
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, sep, values = part.partition("=")
        name = name.strip()
        if not sep or name not in GRID_AXES:
            raise UsageError(f"bad --grid entry {part!r}; expected one of {', '.join(GRID_AXES)}=v1,v2,...")
        try:
            axes[name] = tuple(float(v) for v in values.split(","))
        except ValueError:
            raise UsageError(f"bad --grid values for {name!r}: {values!r}") from None
    grid = GridSpec(**axes)
    try:
        grid.check()
    except ValueError as e:
        raise UsageError(str(e)) from None
    return grid


def resolve_seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("SIMSEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SIMSEED must be an integer (got {env!r})") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="damreg", description="Day-ahead market clearing under regulated settlement.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("clear", "clear the market with the firm's submitted offer"),
                       ("regulate", "base and reference clearings plus the regulated settlement"),
                       ("sweep", "firm profit over the distortion grid under each regime"),
                       ("verify", "run the property suite; exit 4 on any failure")):
        sp = sub.add_parser(name, help=text, description=text)
        sp.add_argument("--scenario", required=True, help="scenario document (JSON)")
        sp.add_argument("--out", default="reports", help="directory for report tables (default: reports)")
        sp.add_argument("--seed", type=int, default=None, help="sampling seed (default: $SIMSEED or 0)")
        sp.add_argument("--grid", default=None, help='distortion grid overrides, e.g. "alpha=1,2;withhold=0,0.5"')
        sp.add_argument("--regime", choices=REGIMES, default="proposed")
    return p


def _clearing_tables(out: Path, r: ClearingResult, prefix=""):
    s = r.scenario
    write_table(out / f"{prefix}lmp.csv", ["node", "hour", "lmp"],
                [(n, h, float(r.lmp[i, h])) for i, n in enumerate(s.network.nodes) for h in range(s.hours)])
    d = r.dispatch
    rows = [(uid, "firm", h, float(x[h])) for uid, x in d.firm_schedule.items() for h in range(s.hours)]
    rows += [(uid, "other", h, float(x[h])) for uid, x in d.other_schedule.items() for h in range(s.hours)]
    write_table(out / f"{prefix}dispatch.csv", ["unit", "owner", "hour", "mw"], rows)
    write_table(out / f"{prefix}consumption.csv", ["demand", "hour", "mw"],
                [(k, h, float(v[h])) for k, v in d.consumption.items() for h in range(s.hours)])
    write_table(out / f"{prefix}flows.csv", ["line", "from", "to", "hour", "mw"],
                [(k, l.from_node, l.to_node, h, float(d.flows[k, h]))
                 for k, l in enumerate(s.network.lines) for h in range(s.hours)])
    st = settle(r)
    rows = [("load", k, -float(v)) for k, v in st.load_payments.items()]
    rows += [("generator", k, float(v)) for k, v in st.generator_receipts.items()]
    rows.append(("network", "congestion_rent", float(st.congestion_rent)))
    write_table(out / f"{prefix}settlement.csv", ["party", "id", "amount"], rows)
    return st


def _summary(out: Path, name: str, fields):
    write_table(out / name, ["field", "value"], [(k, float(v) if not isinstance(v, str) else v) for k, v in fields])
    for k, v in fields:
        print(f"{k}: {v:.6f}" if not isinstance(v, str) else f"{k}: {v}")


def cmd_clear(args, loaded, out: Path) -> int:
    r = clear(loaded.scenario, loaded.submitted, run="base")
    _clearing_tables(out, r)
    _summary(out, "summary.csv", [
        ("welfare_offered", r.U), ("welfare_true", r.U_true), ("U_other", r.U_other),
        ("firm_lmp_revenue", r.firm_lmp_revenue()), ("firm_true_cost", r.firm_true_cost),
    ])
    return EXIT_OK


def cmd_regulate(args, loaded, out: Path) -> int:
    s = loaded.scenario
    if args.regime == "standard":
        from .regulation import reference_run
        ref = reference_run(s, loaded.estimate)
        _clearing_tables(out, ref)
        _summary(out, "regulation.csv", [
            ("regime", "standard"), ("firm_revenue", ref.firm_lmp_revenue()),
            ("firm_true_cost", ref.firm_true_cost), ("firm_profit", standard_profit(ref)),
        ])
        return EXIT_OK
    outcome = run_regulation(s, loaded.submitted, loaded.estimate, apply=args.regime == "proposed")
    _clearing_tables(out, outcome.base_run)
    _summary(out, "regulation.csv", [
        ("regime", args.regime), ("R", outcome.R), ("c", outcome.c),
        ("U_other_base", outcome.base_run.U_other), ("U_other_reference", outcome.reference_run.U_other),
        ("regulated_revenue", outcome.regulated_revenue), ("lmp_revenue_at_base", outcome.lmp_revenue_at_base),
        ("uplift", outcome.uplift), ("firm_revenue", outcome.firm_revenue),
        ("firm_true_cost", outcome.base_run.firm_true_cost), ("firm_profit", outcome.firm_profit),
    ])
    write_table(out / "allocations.csv", ["demand", "uplift_charge"],
                [(k, float(v)) for k, v in outcome.allocations.items()])
    return EXIT_OK


def cmd_sweep(args, loaded, out: Path) -> int:
    res = best_response_sweep(loaded.scenario, loaded.estimate, loaded.grid)
    ties = set(res.ties[args.regime])
    rows = []
    for i, p in enumerate(res.points):
        sp = p.spec
        rows.append((sp.alpha, sp.beta, sp.withhold, sp.ramp_scale, int(p.feasible),
                     p.profit_unregulated, p.profit_standard, p.profit_proposed, p.deadweight_loss,
                     p.profit_proposed + p.deadweight_loss, p.fingerprint,
                     int(i == res.truthful_index), int(i in ties), int(i == res.argmax[args.regime])))
    write_table(out / "sweep.csv",
                ["alpha", "beta", "withhold", "ramp_scale", "feasible", "profit_none", "profit_standard",
                 "profit_proposed", "deadweight_loss", "alignment", "dispatch", "truthful", "tied_max",
                 "argmax"], rows)
    summary = []
    for regime in REGIMES:
        b = res.best(regime)
        summary.append((regime, b.spec.alpha, b.spec.beta, b.spec.withhold, b.spec.ramp_scale,
                        b.profit(regime), b.deadweight_loss, int(res.argmax[regime] == res.truthful_index),
                        len(res.ties[regime])))
    write_table(out / "sweep_summary.csv",
                ["regime", "alpha", "beta", "withhold", "ramp_scale", "profit", "deadweight_loss",
                 "truthful", "ties"], summary)
    b = res.best(args.regime)
    print(f"{args.regime}: argmax alpha={b.spec.alpha} beta={b.spec.beta} withhold={b.spec.withhold} "
          f"ramp_scale={b.spec.ramp_scale} profit={b.profit(args.regime):.6f} "
          f"truthful={res.argmax[args.regime] == res.truthful_index}")
    return EXIT_OK


def cmd_verify(args, loaded, out: Path) -> int:
    rows = run_property_suite(loaded.scenario, loaded.estimate, loaded.grid, seed=args.seed)
    write_table(out / "verify.csv", ["check", "passed", "value", "tolerance", "detail"],
                [(r.name, int(r.passed), float(r.value), float(r.tolerance), r.detail) for r in rows])
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} value={r.value:.3e} tol={r.tolerance:.1e} {r.detail}".rstrip())
    return EXIT_OK if all(r.passed for r in rows) else EXIT_PROPERTY


COMMANDS = {"clear": cmd_clear, "regulate": cmd_regulate, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.seed = resolve_seed(args.seed)
        loaded = load_scenario(args.scenario)
        loaded = loaded._replace(grid=parse_grid_overrides(args.grid, loaded.grid))
    except UsageError as e:
        print(f"damreg: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as e:
        print(f"damreg: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args, loaded, out)
    except EnvelopeError as e:
        print(f"damreg: ValidationError: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as e:
        print(f"damreg: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
