"""Command-line front end.

Subcommands::

    gpoo run <config.toml>            one experiment (trace + aggregate files)
    gpoo sweep-costs <config.toml>    regret-vs-time per evaluation cost
    gpoo bench --suite table1         the benchmark table, gpoo + gpucb
    gpoo verify-theory [--check NAME] numerical theory checks, JSON report
    gpoo partition-dump <config.toml> cells of the partition tree as CSV
    gpoo registry-dump                known benchmarks / kernels / checks

Global flags (before the subcommand): --seed, --out, --clock, --format.
Exit codes: 0 all work succeeded, 1 partial or runtime failure, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from gpoo import analysis
from gpoo.harness import (
    ConfigError,
    DEFAULT_SWEEP_COSTS,
    ExperimentConfig,
    resolve_out,
    run_experiment,
    sweep_costs,
)
from gpoo.kernels import KernelSpec, SUPPORTED_NU
from gpoo.objectives import BENCHMARK_NAMES, TABLE1, _BENCH_FUNCS
from gpoo.partition import (
    cell_csv_header,
    cell_csv_row,
    cell_diameter,
    root_cell,
    split_cell,
    with_delta,
)

_KERNEL_FAMILIES = ("se", "matern", "rational-quadratic", "wiener",
                    "quadratic", "linear", "euclidean")

# Acquisition-grid resolution per dimension for suite runs: keeps the
# grid near 10^3 points so the cubic GP cost stays desk-scale.
_BENCH_UCB_RESOLUTION = {1: 101, 2: 21, 3: 11, 4: 5}
BENCH_UCB_BUDGET_CAP = 500


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gpoo",
        description="Optimistic optimization with GP kernel metrics: "
                    "experiments, baselines, and theory checks.",
    )
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's seed list with one seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--clock", choices=("virtual", "real"), default=None,
                   help="override the config's clock mode")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"),
                   default=None, help="output format for dump commands")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config")

    sweep_p = sub.add_parser("sweep-costs",
                             help="re-time one config across eval costs")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--costs", default=None,
                         help="comma-separated costs in seconds "
                              "(default 0.01,0.1,1,10)")

    bench_p = sub.add_parser("bench", help="run the benchmark suite")
    bench_p.add_argument("--suite", choices=("table1",), default="table1")
    bench_p.add_argument("--budget", type=int, default=500)
    bench_p.add_argument("--optimizers", default="gpoo,gpucb",
                         help="comma-separated subset of gpoo,gpucb,random")
    bench_p.add_argument("--only", default=None,
                         help="comma-separated benchmark names")

    vt_p = sub.add_parser("verify-theory", help="numerical theory checks")
    vt_p.add_argument("--check", default=None,
                      help=f"one of {', '.join(analysis.CHECK_NAMES)} "
                           "(default: all)")

    pd_p = sub.add_parser("partition-dump",
                          help="dump partition-tree cells with diameters")
    pd_p.add_argument("config")
    pd_p.add_argument("--depth", type=int, default=8)

    sub.add_parser("registry-dump", help="list benchmarks, kernels, checks")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.clock is not None:
        cfg = replace(cfg, clock=args.clock)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    outcome = run_experiment(cfg)
    for failure in outcome.failures:
        print(f"seed {failure['seed']} failed: {failure['error']}",
              file=sys.stderr)
    print(f"{len(outcome.results)}/{len(cfg.seeds)} runs ok -> "
          f"{outcome.out_dir}")
    return outcome.exit_code()


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    costs = DEFAULT_SWEEP_COSTS
    if args.costs:
        costs = tuple(float(c) for c in args.costs.split(","))
    outcome = sweep_costs(cfg, costs=costs)
    for failure in outcome.failures:
        print(f"{failure['optimizer']} seed {failure['seed']} failed: "
              f"{failure['error']}", file=sys.stderr)
    print(f"{len(outcome.results)} base runs, {len(costs)} cost levels -> "
          f"{outcome.out_dir}")
    return outcome.exit_code()


def bench_config(name: str, optimizer: str, budget: int, seed: int,
                 clock: str = "virtual", out=None) -> ExperimentConfig:
    """The suite configuration for one benchmark row and optimizer."""
    entry = TABLE1[name]
    budget = min(budget, BENCH_UCB_BUDGET_CAP) if optimizer == "gpucb" \
        else budget
    return ExperimentConfig(
        optimizer=optimizer,
        objective=name,
        budget=budget,
        seeds=(seed,),
        kernel_family="matern",
        kernel_nu=1.5,
        kernel_lengthscale=entry.lengthscale,
        beta_mode="fixed",
        beta_fixed=entry.beta_oo,
        ucb_beta_fixed=entry.beta_ucb,
        ucb_resolution=_BENCH_UCB_RESOLUTION.get(entry.dim, 2),
        clock=clock,
        out=out,
    )


def _cmd_bench(args) -> int:
    seed = 0 if args.seed is None else args.seed
    optimizers = tuple(s.strip() for s in args.optimizers.split(",") if s)
    names = BENCHMARK_NAMES
    if args.only:
        wanted = [s.strip() for s in args.only.split(",")]
        unknown = [w for w in wanted if w not in TABLE1]
        if unknown:
            raise ConfigError(f"unknown benchmarks: {unknown}")
        names = tuple(wanted)
    root = Path(args.out or "results") / "bench"
    failed = 0
    for name in names:
        for opt in optimizers:
            cfg = bench_config(name, opt, args.budget, seed,
                               clock=args.clock or "virtual",
                               out=str(root / f"{name}-{opt}"))
            outcome = run_experiment(cfg)
            if outcome.failures:
                failed += 1
                print(f"{name} {opt}: FAILED "
                      f"{outcome.failures[0]['error']}", file=sys.stderr)
                continue
            run = outcome.results[0]
            regret = run.records[-1].simple_regret
            print(f"{name} {opt}: best={run.best_value!r} "
                  f"simple_regret={regret!r} evals={run.n_evals}")
    return 1 if failed else 0


def _cmd_verify_theory(args) -> int:
    names = None if args.check is None else [args.check]
    report = analysis.run_checks(names, seed=args.seed or 0)
    if args.fmt == "csv":
        print("check,lhs,rhs,pass,trials,seed")
        for row in report:
            print(f"{row['check']},{row['lhs']!r},{row['rhs']!r},"
                  f"{row['pass']},{row['trials']},{row['seed']}")
    else:
        print(json.dumps(report, indent=2))
    return 0 if all(row["pass"] for row in report) else 1


def _cmd_partition_dump(args) -> int:
    cfg = _load_config(args)
    if args.depth < 0 or args.depth > 20:
        raise ConfigError("depth must lie in [0, 20]")
    from gpoo.harness import resolve_objective

    objective = resolve_objective(cfg, cfg.seeds[0])
    spec = cfg.kernel_spec()
    scheme = cfg.partition_scheme()
    root = with_delta(root_cell(objective.lower, objective.upper),
                      cell_diameter(root_cell(objective.lower,
                                              objective.upper), spec, scheme))
    cells = [root]
    frontier = [root]
    for _ in range(args.depth):
        nxt = []
        for cell in frontier:
            children = split_cell(cell, spec, scheme)
            nxt.extend(children)
        cells.extend(nxt)
        frontier = nxt
    out = resolve_out(cfg, args.out)
    if args.fmt == "json":
        path = out / "partition.json"
        payload = [dict(zip(cell_csv_header(root.dim), cell_csv_row(c)))
                   for c in cells]
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        path = out / "partition.csv"
        with open(path, "w") as fh:
            fh.write(",".join(cell_csv_header(root.dim)) + "\n")
            for c in cells:
                fh.write(",".join(cell_csv_row(c)) + "\n")
    print(f"{len(cells)} cells -> {path}")
    return 0


def _cmd_registry_dump(args) -> int:
    if args.fmt == "json":
        payload = {
            "benchmarks": [
                {"name": e.name, "dim": e.dim,
                 "lower": e.interval[0], "upper": e.interval[1],
                 "lengthscale": e.lengthscale, "beta_ucb": e.beta_ucb,
                 "beta_oo": e.beta_oo,
                 "min_value": _BENCH_FUNCS[e.name][1]}
                for e in TABLE1.values()
            ],
            "kernels": list(_KERNEL_FAMILIES),
            "matern_nu": list(SUPPORTED_NU),
            "checks": list(analysis.CHECK_NAMES),
        }
        print(json.dumps(payload, indent=2))
    else:
        print("name,dim,lower,upper,lengthscale,beta_ucb,beta_oo,min_value")
        for e in TABLE1.values():
            print(f"{e.name},{e.dim},{e.interval[0]!r},{e.interval[1]!r},"
                  f"{e.lengthscale!r},{e.beta_ucb!r},{e.beta_oo!r},"
                  f"{_BENCH_FUNCS[e.name][1]!r}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep-costs": _cmd_sweep,
    "bench": _cmd_bench,
    "verify-theory": _cmd_verify_theory,
    "partition-dump": _cmd_partition_dump,
    "registry-dump": _cmd_registry_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, not usage
        print(f"error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
