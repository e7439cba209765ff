"""Command line front end: ``ckptagg run|sweep|verify|plan``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import FORMATS, MODES, ExperimentConfig
from .errors import ConfigError, ExecutionError, PlanError
from .executor import RunDirectory, execute, plan_to_dict, read_manifest, verify_aggregate
from .model import plan_coverage_check
from .planner import stripe_conflicts
from .report import COLUMNS, Row, comparison_table, emit_plot_series, emit_report, sig6
from .simulator import Scenario, sweep
from .strategies import STRATEGIES

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2


class _Fail(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--strategy", action="append", choices=STRATEGIES,
                        help="strategy to run (repeatable); overrides the config")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--out", help="report path, '-' for stdout")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--run-dir", help="root directory for execute mode")

    p = argparse.ArgumentParser(prog="ckptagg", description="Checkpoint flush strategies")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="plan, simulate and/or execute")
    sw = sub.add_parser("sweep", parents=[common], help="simulate the configured grid")
    sw.add_argument("--series", choices=COLUMNS, help="also write plot series for a metric")
    sub.add_parser("plan", parents=[common], help="print the flush plan as JSON (stdout unless --out)")
    v = sub.add_parser("verify", help="re-check an executed run directory")
    v.add_argument("run_dir", type=Path)
    return p


def _load(args: argparse.Namespace) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict()
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"cannot read config: {exc}") from None
    strategy = None
    if args.strategy:
        strategy = args.strategy[0] if len(args.strategy) == 1 else list(args.strategy)
    return cfg.with_overrides(strategy=strategy, mode=args.mode, out=args.out,
                              format=args.format, seed=args.seed, run_dir=args.run_dir)


def _write(cfg: ExperimentConfig, text: str, suffix: str = "") -> None:
    """Write ``text`` to the configured output plus a config echo beside it."""
    if str(cfg.out) == "-":
        sys.stdout.write(text)
        return
    path = Path(f"{cfg.out}{suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if not suffix:
        echo = Path(f"{cfg.out}.config.json")
        echo.write_text(json.dumps(cfg.doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {path} ({echo.name})", file=sys.stderr)


def _measured_row(sc: Scenario, plan, local: float, flush: float) -> Row:
    total = sc.ckpts.total_bytes
    return Row(
        strategy=plan.strategy_name,
        node_count=sc.cluster.node_count,
        ranks_per_node=sc.cluster.ranks_per_node,
        local_throughput=sig6(total / local if local > 0 else 0.0),
        flush_throughput=sig6(total / flush if flush > 0 else 0.0),
        conflicts=stripe_conflicts(plan.extents, sc.layout)[0],
        network_bytes=plan.network_bytes,
        barrier_wait=0.0,
        slowdown=0.0,
    )


def _run_dir_for(cfg: ExperimentConfig, sc: Scenario, many_scales: bool) -> Path:
    root = cfg.run_dir / sc.strategy.strategy
    if many_scales:
        root = root / f"n{sc.cluster.node_count}r{sc.cluster.ranks_per_node}"
    return root


def cmd_run(cfg: ExperimentConfig) -> int:
    scenarios = cfg.scenarios()
    plans = [sc.plan() for sc in scenarios]
    rows: list[Row] = []
    if cfg.mode in ("simulate", "both"):
        rows = comparison_table((sc, sc.run(p)) for sc, p in zip(scenarios, plans))
    if cfg.mode in ("execute", "both"):
        limit = cfg.doc["execute_limit_bytes"]
        needed = sum(sc.ckpts.total_bytes for sc in scenarios)
        if needed > limit:
            raise _Fail(EXIT_USAGE, f"execute mode would write {needed} bytes, above the "
                                    f"execute_limit_bytes cap of {limit}")
        many = len({(s.cluster.node_count, s.cluster.ranks_per_node) for s in scenarios}) > 1
        measured = []
        failed = False
        for sc, plan in zip(scenarios, plans):
            root = _run_dir_for(cfg, sc, many)
            local, flush, mismatch = execute(plan, sc.ckpts, sc.cluster, sc.layout, root,
                                             sc.strategy.io_threads_per_backend)
            if mismatch is not None:
                print(f"{plan.strategy_name}: verification FAILED: {mismatch}", file=sys.stderr)
                failed = True
            else:
                print(f"{plan.strategy_name}: verified {root}", file=sys.stderr)
            measured.append(_measured_row(sc, plan, local, flush))
        if not rows:
            rows = measured
        _write(cfg, emit_report(rows, cfg.format))
        return EXIT_VERIFY if failed else EXIT_OK
    _write(cfg, emit_report(rows, cfg.format))
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, series: Optional[str]) -> int:
    rows = comparison_table(sweep(cfg.scenarios()))
    _write(cfg, emit_report(rows, cfg.format))
    if series:
        by_nodes = {}
        for n in sorted({r.node_count for r in rows}):
            by_nodes[str(n)] = emit_plot_series(rows, series, n)
        _write(cfg, json.dumps({"metric": series, "x": "ranks_per_node", "node_count": by_nodes},
                               indent=1) + "\n", f".{series}.series.json")
    return EXIT_OK


def cmd_plan(cfg: ExperimentConfig, to_file: bool) -> int:
    plans = {sc.strategy.strategy: plan_to_dict(sc.plan()) for sc in cfg.scenarios()}
    doc = next(iter(plans.values())) if len(plans) == 1 else plans
    text = json.dumps(doc, indent=1) + "\n"
    if to_file:
        _write(cfg, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(run_dir: Path) -> int:
    rundir = RunDirectory(run_dir)
    if not rundir.manifest.exists():
        raise _Fail(EXIT_USAGE, f"no manifest at {rundir.manifest}")
    try:
        plan, ckpts, cluster = read_manifest(rundir)
    except (ValueError, KeyError, TypeError) as exc:
        raise _Fail(EXIT_USAGE, f"malformed manifest {rundir.manifest}: {exc}") from None
    violation = plan_coverage_check(plan, ckpts)
    if violation is not None:
        print(f"manifest plan is inconsistent: {violation}", file=sys.stderr)
        return EXIT_VERIFY
    mismatch = verify_aggregate(rundir, ckpts, plan)
    if mismatch is not None:
        print(f"verification FAILED: {mismatch}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verified {len(plan.file_sizes)} destination file(s), {ckpts.total_bytes} bytes",
          file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.run_dir)
        cfg = _load(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.series)
        return cmd_plan(cfg, args.out is not None)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, PlanError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExecutionError as exc:
        print(f"execution failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
