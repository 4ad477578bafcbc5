"""Command-line front end.

    mgsizing synth    --seed 0 --hours 8760 --out trace.csv
    mgsizing dispatch --design 2000,1200 --method milp --out results/
    mgsizing size     --config run.ini --jobs 4 --out results/
    mgsizing compare  --design 2000,1200 --out results/

Exit codes: 0 success, 1 usage or input error, 2 a solve did not reach optimality.
Every text report starts with the fully resolved configuration; each table is
also written as CSV next to it. Reports carry no timestamps or timings, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .annual import SCHEDULE_COLUMNS, WindowFailure, evaluate_design
from .config import ConfigError, RunConfig, load_config
from .dispatch import Design
from .oo import BoostResult, run_boost
from .timeseries import TraceError, synth_trace, write_trace

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2
COMPARE_METHODS = ("milp", "dp", "greedy")

log = logging.getLogger("mgsizing")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ output
def format_table(headers: list[str], rows: list[list[str]]) -> str:
    """Right-aligned columns separated by two spaces."""
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def write_csv(path: Path, headers: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)


def _num(x: float, digits: int) -> str:
    return f"{x:.{digits}f}"


def _gain(g: int) -> str:
    return f"{g:+d}" if g else "0"


def _report(title: str, cfg: RunConfig, sections: list[tuple[str, str]]) -> str:
    parts = [title, "=" * len(title), "", "Configuration", "-------------", cfg.to_ini().rstrip()]
    for head, body in sections:
        parts += ["", head, "-" * len(head), body]
    return "\n".join(parts) + "\n"


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


# ------------------------------------------------------------------ helpers
def parse_design(text: str) -> Design:
    try:
        eb, pv = (float(v) for v in text.split(","))
        return Design(eb, pv)
    except ValueError as exc:
        raise UsageError(f"--design expects 'E_B,PV' in kWh,kW (got {text!r}): {exc}") from None


def _resolved(cfg: RunConfig):
    """Load the trace and pin derived diesel limits into the config."""
    trace = cfg.trace.load()
    cfg = replace(cfg, params=cfg.params.resolve(trace.peak_load))
    return cfg, trace


def _evaluate(cfg, trace, design, method, keep=False):
    return evaluate_design(trace, design, cfg.params, method, cfg.trace.window_length,
                           cfg.solver.make(), cfg.dp, keep_schedules=keep)


# ------------------------------------------------------------------ commands
def cmd_synth(args, cfg: RunConfig) -> int:
    trace = synth_trace(cfg.trace.seed, cfg.trace.hours)
    out = Path(args.out) if args.out else Path(f"synth_seed{cfg.trace.seed}.csv")
    if out.is_dir():
        out = out / f"synth_seed{cfg.trace.seed}.csv"
    write_trace(trace, out)
    print(f"wrote {trace.H} hours to {out}")
    return EXIT_OK


def cmd_dispatch(args, cfg: RunConfig, out: Path) -> int:
    if args.design is None:
        raise UsageError("dispatch needs --design E_B,PV")
    design = parse_design(args.design)
    method = args.method or "milp"
    cfg, trace = _resolved(cfg)
    try:
        res = _evaluate(cfg, trace, design, method, keep=True)
    except WindowFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    sched = res.schedule()
    headers = ["hour", *SCHEDULE_COLUMNS, "SOC"]
    rows = [[str(t), *(repr(float(sched[k][t])) for k in SCHEDULE_COLUMNS), repr(float(sched["SOC"][t]))]
            for t in range(trace.H)]
    # closing row: only the end-of-horizon SOC
    rows.append([str(trace.H), *([""] * len(SCHEDULE_COLUMNS)), repr(float(sched["SOC"][-1]))])
    write_csv(out / f"schedule_{method}.csv", headers, rows)

    bd = res.breakdown(cfg.cost)
    summary = [["method", method], ["E_B (kWh)", _num(design.E_B, 3)],
               ["PV size (kW)", _num(design.PV_size, 3)], ["windows", str(len(res.window_costs))],
               ["op cost ($/yr)", _num(bd.op_cost, 2)], ["PV annuity ($/yr)", _num(bd.inv_pv, 2)],
               ["battery annuity ($/yr)", _num(bd.inv_batt, 2)], ["total ($/yr)", _num(bd.total, 2)],
               ["energy served (kWh)", _num(bd.energy_served, 2)], ["LCOE (¢/kWh)", _num(bd.lcoe, 4)]]
    table = format_table(["quantity", "value"], summary)
    write_csv(out / f"summary_{method}.csv", ["quantity", "value"], summary)
    _write(out / f"summary_{method}.txt", _report(f"Dispatch summary ({method})", cfg,
                                                   [("Result", table)]))
    print(table)
    return EXIT_OK


FINALIST_HEADERS = ["Rank", "E_B (MWh)", "PV size (MW)", "LCOE (¢/kWh)", "Order Gain",
                    "Phase-1 rank", "Phase-1 LCOE (¢/kWh)"]


def _finalist_rows(result: BoostResult) -> list[list[str]]:
    return [[str(rd.phase2_rank), _num(rd.design.E_B / 1000, 3), _num(rd.design.PV_size / 1000, 3),
             _num(rd.phase2_breakdown.lcoe, 4), _gain(rd.order_gain), str(rd.phase1_rank),
             _num(rd.phase1_breakdown.lcoe, 4)] for rd in result.finalists]


def _boost(cfg: RunConfig, trace, jobs: int) -> BoostResult:
    return run_boost(trace, cfg.plan.build(), cfg.params, cfg.cost, cfg.sampling.build(),
                     cfg.solver.make(), cfg.trace.window_length, jobs)


def cmd_size(args, cfg: RunConfig, out: Path) -> int:
    cfg, trace = _resolved(cfg)
    result = _boost(cfg, trace, args.jobs)
    plan = result.plan
    rows = _finalist_rows(result)
    write_csv(out / "finalists.csv", FINALIST_HEADERS, rows)
    p1_headers = ["Phase-1 rank", "E_B (MWh)", "PV size (MW)", "LCOE (¢/kWh)", "total ($/yr)"]
    p1_rows = [[str(rd.phase1_rank), _num(rd.design.E_B / 1000, 3), _num(rd.design.PV_size / 1000, 3),
                _num(rd.phase1_breakdown.lcoe, 4), _num(rd.phase1_cost, 2)] for rd in result.ranked]
    write_csv(out / "phase1.csv", p1_headers, p1_rows)

    plan_text = format_table(["N", "g", "k", "s", "AP"],
                             [[str(plan.N), str(plan.g), str(plan.k), str(plan.s), _num(plan.AP, 4)]])
    sections = [("Plan", plan_text), ("Finalists, accurate model", format_table(FINALIST_HEADERS, rows))]
    if result.diagnostics is not None:
        d = result.diagnostics
        diag = [["Spearman rho", _num(d.spearman_rho, 4)], ["Kendall tau", _num(d.kendall_tau, 4)],
                ["max |order gain|", str(d.max_abs_gain)],
                ["share with |order gain| <= 2", _num(d.frac_within_2, 4)], ["finalists", str(d.count)]]
        write_csv(out / "diagnostics.csv", ["diagnostic", "value"], diag)
        sections.append(("Order robustness", format_table(["diagnostic", "value"], diag)))
    excl = [[_num(d.E_B, 3), _num(d.PV_size, 3), phase, reason] for d, phase, reason in result.excluded]
    sections.append(("Excluded designs", format_table(["E_B (kWh)", "PV size (kW)", "phase", "reason"], excl)
                     if excl else "none"))
    sections.append(("Phase-1 ranking, simple model", format_table(p1_headers, p1_rows)))
    _write(out / "size_report.txt", _report("BOOST sizing report", cfg, sections))
    print(sections[1][1])
    if result.excluded or not result.finalists:
        print(f"error: {len(result.excluded)} design(s) failed to solve", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig, out: Path) -> int:
    cfg, trace = _resolved(cfg)
    if args.design is not None:
        design, source = parse_design(args.design), "given"
    else:
        result = _boost(cfg, trace, args.jobs)
        if not result.finalists:
            print("error: no design survived BOOST", file=sys.stderr)
            return EXIT_SOLVER
        design, source = result.winner.design, "BOOST phase-2 winner"
    methods = (args.method,) if args.method else COMPARE_METHODS
    if "milp" not in methods:
        methods = ("milp", *methods)
    status, rows, base = EXIT_OK, [], None
    for m in methods:
        try:
            res = _evaluate(cfg, trace, design, m)
        except WindowFailure as exc:
            print(f"error: {m}: {exc}", file=sys.stderr)
            rows.append([m, "failed", "failed", "failed"])
            status = EXIT_SOLVER
            continue
        bd = res.breakdown(cfg.cost)
        if m == "milp":
            base = bd.lcoe
        gap = "" if base is None else _num(100 * (bd.lcoe - base) / base, 3)
        rows.append([m, _num(bd.lcoe, 4), _num(bd.op_cost, 2), gap])
    headers = ["Method", "LCOE (¢/kWh)", "op cost ($/yr)", "vs milp (%)"]
    table = format_table(headers, rows)
    write_csv(out / "compare.csv", headers, rows)
    design_text = format_table(["E_B (MWh)", "PV size (MW)", "source"],
                               [[_num(design.E_B / 1000, 3), _num(design.PV_size / 1000, 3), source]])
    _write(out / "compare_report.txt", _report("Dispatch method comparison", cfg,
                                               [("Design", design_text), ("LCOE by method", table)]))
    print(table)
    return status


# ------------------------------------------------------------------ parsing
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="synthetic trace and sampling seed")
    common.add_argument("--hours", type=int, help="synthetic trace length")
    common.add_argument("--trace", help="CSV trace to use instead of the synthetic one")
    common.add_argument("--out", help="output directory (file path for synth)")
    common.add_argument("--backend", choices=("embedded", "highs"), help="MILP/LP solver backend")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mgsizing", description="Microgrid PV and battery sizing by ordinal optimization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write a synthetic hourly trace")
    d = sub.add_parser("dispatch", parents=[common], help="dispatch one design over the trace")
    d.add_argument("--design", help="E_B,PV in kWh,kW")
    d.add_argument("--method", choices=("lp", "milp", "dp", "greedy"))
    s = sub.add_parser("size", parents=[common], help="BOOST sizing: rank, re-rank, report")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for design evaluation")
    c = sub.add_parser("compare", parents=[common], help="LCOE of one design under each dispatch method")
    c.add_argument("--design", help="E_B,PV in kWh,kW (default: BOOST winner)")
    c.add_argument("--method", choices=COMPARE_METHODS, help="limit to one method besides milp")
    c.add_argument("--jobs", type=int, default=1, help="worker processes for design evaluation")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    trace = {}
    if args.seed is not None:
        trace["seed"] = str(args.seed)
        cfg = cfg.with_values("Sampling", {"seed": str(args.seed)})
    if args.hours is not None:
        trace["hours"] = str(args.hours)
    if args.trace is not None:
        trace["source"] = args.trace
    if trace:
        cfg = cfg.with_values("trace", trace)
    if args.backend is not None:
        cfg = cfg.with_values("solver", {"backend": args.backend})
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.rpartition(".")
        if not (sep and dot):
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        cfg = cfg.with_values(section, {name: value})
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(args, cfg)
        out = Path(args.out or "results")
        out.mkdir(parents=True, exist_ok=True)
        handler = {"dispatch": cmd_dispatch, "size": cmd_size, "compare": cmd_compare}[args.command]
        return handler(args, cfg, out)
    except (UsageError, ConfigError, TraceError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
