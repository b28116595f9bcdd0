"""Command-line entry point: ``ineqvqa <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .instances import brute_force_solve, get_scenario, instance_to_dict, load_catalog
from .optimizer import OptimizerConfig
from .qubo import Variant, build_hamiltonian, default_weights


def _cmd_instances(args) -> int:
    catalog = load_catalog()
    if args.action == "export":
        chosen = [i for i in catalog if args.scenario is None or i.scenario_id == args.scenario]
        print(json.dumps([instance_to_dict(i) for i in chosen], indent=2))
        return 0
    print(f"{'scen':>4} {'M':>2} {'N':>2} {'x-bits':>6} {'slack':>5}  capacities")
    for inst in catalog:
        print(
            f"{inst.scenario_id:>4} {inst.num_knapsacks:>2} {inst.num_items:>2} "
            f"{inst.num_x:>6} {inst.num_slack:>5}  {list(inst.capacities)}"
        )
    return 0


def _cmd_solve(args) -> int:
    inst = get_scenario(args.scenario)
    res = brute_force_solve(inst)
    out = {
        "scenario": args.scenario,
        "optimal_value": res.optimal_value,
        "num_optimal": res.num_optimal,
        "count_90pct": res.count_90pct,
        "optimal_assignments": [a.tolist() for a in res.optimal_assignments],
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_qubo(args) -> int:
    inst = get_scenario(args.scenario)
    variant = Variant(args.variant)
    weights = default_weights(inst, variant)
    model = build_hamiltonian(inst, variant, weights)
    text = model.to_json()
    if args.export:
        Path(args.export).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {model.num_vars}-variable {variant.value} QUBO to {args.export}")
    else:
        print(text)
    return 0


def _optimizer_overrides(args, base: OptimizerConfig) -> OptimizerConfig:
    mapping = {
        "lr": "learning_rate",
        "omega": "window",
        "f_omega": "f_omega",
        "f_sd": "f_sd",
        "fd_eps": "fd_step",
        "max_iters": "max_iterations",
    }
    changes = {field: getattr(args, arg) for arg, field in mapping.items() if getattr(args, arg) is not None}
    return replace(base, **changes) if changes else base


def _cmd_run(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = harness.ExperimentConfig.from_dict(doc)
    changes = {}
    if args.schedule:
        changes["schedule"] = args.schedule
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.output:
        changes["output"] = args.output
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.no_timing:
        changes["record_timing"] = False
    if not args.large:
        # circuits beyond ~20 qubits are opt-in
        changes["max_qubits"] = min(config.max_qubits, 20)
    changes["optimizer"] = _optimizer_overrides(args, config.optimizer)
    config = replace(config, **changes)

    def progress(rec):
        if args.verbose:
            print(json.dumps({k: rec.get(k) for k in harness.CSV_COLUMNS}), file=sys.stderr)

    result = harness.run_experiment(config, progress=progress)
    skipped = sum("error" in r for r in result.records)
    if args.csv:
        Path(args.csv).write_text(result.to_csv(), encoding="utf-8")
    print(harness.format_rows(result.means, "summary-table"), end="")
    if skipped:
        print(f"{skipped} cells skipped (qubit limit); rerun with --large to include them", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    try:
        print(harness.report(args.results, args.format), end="")
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_verify(args) -> int:
    rep = harness.verify_tables()
    print(rep.render(), end="")
    return 0 if rep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ineqvqa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("instances", help="list or export the scenario catalog")
    p.add_argument("action", choices=["list", "export"])
    p.add_argument("--scenario", type=int)
    p.set_defaults(func=_cmd_instances)

    p = sub.add_parser("solve", help="exact brute-force optimum of a scenario")
    p.add_argument("scenario", type=int)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("qubo", help="QUBO construction")
    qsub = p.add_subparsers(dest="qubo_command", required=True)
    b = qsub.add_parser("build")
    b.add_argument("scenario", type=int)
    b.add_argument("--variant", choices=[v.value for v in Variant], default="noslack")
    b.add_argument("--export", metavar="PATH")
    b.set_defaults(func=_cmd_qubo)

    p = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--output", help="JSON-lines results file (appended)")
    p.add_argument("--csv", help="also write per-cell results as CSV")
    p.add_argument("--schedule", choices=["sine", "linear", "random"])
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--omega", type=int)
    p.add_argument("--f-omega", type=float)
    p.add_argument("--f-sd", type=float)
    p.add_argument("--fd-eps", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--large", action="store_true", help="allow circuits above 20 qubits")
    p.add_argument("--no-timing", action="store_true", help="record wall_ms as 0 for byte-stable output")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="aggregate a results file")
    p.add_argument("results")
    p.add_argument("--format", choices=["csv", "json", "summary-table"], default="summary-table")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("verify-tables", help="check the catalog tables by brute force")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
