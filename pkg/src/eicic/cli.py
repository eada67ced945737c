"""Command-line entry point: ``eicic {generate,solve,baseline,sweep,report}``.

Each run writes one output directory holding a ``manifest.json``.  Exit
codes: 0 ok, 2 bad config or input files, 3 infeasible scenario (some UE
gets no rate), 4 solver did not converge (outputs are still written).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .baselines import BIASED_RSRP, MAX_RSRP, PF, ROUND_ROBIN, BaselineSpec, run_baseline
from .errors import ConfigError, InfeasibleError
from .metrics import jain_index, metrics_report, per_tier_load, ue_throughput
from .scenario import Scenario, build_scenario
from .solver.bcd import HEURISTIC, RELAXED_ROUNDED, BcdOptions, bcd_solve
from .topology import NetworkConfig, build_gain_tensor, generate_layout

log = logging.getLogger("eicic")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4


def _resolve_config(args) -> NetworkConfig:
    config = io.load_config(args.config) if args.config else NetworkConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
        config.validate()
    return config


def _resolve_scenario(args) -> tuple[Scenario, NetworkConfig]:
    if getattr(args, "scenario", None):
        if args.config or args.seed is not None:
            raise ConfigError("--scenario cannot be combined with --config or --seed")
        scenario = io.load_scenario(args.scenario)
        return scenario, scenario.config
    config = _resolve_config(args)
    return build_scenario(config), config


def _manifest(args, config: NetworkConfig, options: dict) -> io.RunManifest:
    return io.RunManifest(
        subcommand=args.command,
        config_path=str(Path(args.config).resolve()) if args.config else None,
        seed=int(config.seed),
        version=io.version_string(),
        options=options,
        output_dir=str(Path(args.out).resolve()),
    )


def _finish(args, config, options) -> None:
    # the manifest goes last so its presence marks a complete run
    io.atomic_write_text(Path(args.out) / io.CONFIG_FILE, io.dump_config(config))
    io.write_manifest(args.out, _manifest(args, config, options))


def _parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included) or a comma list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected start:stop:step")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


# ---------------------------------------------------------------- subcommands


def cmd_generate(args) -> int:
    config = _resolve_config(args)
    topology = generate_layout(config)
    gains = build_gain_tensor(topology, config)
    io.write_scenario(args.out, topology, gains, config)
    if args.dump_rates:
        scenario = Scenario.from_topology(topology, gains, config)
        io.write_rate_table(Path(args.out) / io.RATES_FILE, scenario.rates, scenario.index)
    _finish(args, config, {"dump_rates": args.dump_rates})
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario, config = _resolve_scenario(args)
    options = BcdOptions(
        max_iters=args.max_iters,
        utility_tol=args.tol,
        association=args.association,
        schedule=args.schedule,
    )
    solution = bcd_solve(scenario, options)
    solution.check(scenario.eligible)
    io.write_solution(args.out, solution, scenario)
    if args.dump_rates:
        io.write_rate_table(Path(args.out) / io.RATES_FILE, scenario.rates, scenario.index)
    _finish(
        args,
        config,
        {
            "scenario": str(Path(args.scenario).resolve()) if args.scenario else None,
            "max_iters": args.max_iters,
            "tol": args.tol,
            "association": args.association,
            "schedule": args.schedule,
        },
    )
    log.info("utility %.6f beta %.4f converged %s", solution.utility, solution.beta, solution.converged)
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def cmd_baseline(args) -> int:
    scenario, config = _resolve_scenario(args)
    spec = BaselineSpec(
        association=args.association, bias_db=args.bias_db, beta=args.beta, scheduler=args.scheduler
    )
    solution = run_baseline(spec, scenario)
    solution.check(scenario.eligible)
    io.write_solution(args.out, solution, scenario)
    _finish(
        args,
        config,
        {
            "scenario": str(Path(args.scenario).resolve()) if args.scenario else None,
            "association": spec.association,
            "bias_db": spec.bias_db,
            "beta": spec.beta,
            "scheduler": spec.scheduler,
        },
    )
    if solution.starved:
        log.warning("%d UEs get no resources under %s", len(solution.starved), spec.label)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _sweep_cell(scenario: Scenario, seed: int, bias: float, beta: float, scheduler: str) -> list:
    spec = BaselineSpec(association=BIASED_RSRP, bias_db=bias, beta=beta, scheduler=scheduler)
    solution = run_baseline(spec, scenario)
    solution.check(scenario.eligible)
    thr = ue_throughput(solution, scenario.rates, scenario.rb_bandwidth)
    jain = jain_index(thr) if np.any(thr > 0) else 0.0
    macro_avg, pico_avg = per_tier_load(solution.association, scenario.index)
    return [
        seed,
        bias,
        beta,
        scheduler,
        float(solution.utility),
        jain,
        len(solution.starved),
        macro_avg,
        pico_avg,
        float(thr.min()),
    ]


def cmd_sweep(args) -> int:
    if args.scenario and args.seeds != 1:
        raise ConfigError("--seeds needs a config, not a stored --scenario")
    scenario, config = _resolve_scenario(args)
    drops = [(int(config.seed), scenario)]
    for k in range(1, args.seeds):
        seed = (int(config.seed) + k) % 2**64
        drops.append((seed, build_scenario(config.replace(seed=seed))))
    cells = [
        (drop, seed, bias, beta)
        for seed, drop in drops
        for bias in args.bias_grid
        for beta in args.beta_grid
    ]
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(
            pool.map(lambda c: _sweep_cell(c[0], c[1], c[2], c[3], args.scheduler), cells)
        )
    io.write_csv(
        Path(args.out) / "sweep.csv",
        [
            "seed",
            "bias_db",
            "beta",
            "scheduler",
            "utility",
            "jain",
            "starved",
            "macro_avg_ues",
            "pico_avg_ues",
            "min_throughput_bps",
        ],
        rows,
    )
    _finish(
        args,
        config,
        {
            "scenario": str(Path(args.scenario).resolve()) if args.scenario else None,
            "bias_grid": args.bias_grid,
            "beta_grid": args.beta_grid,
            "scheduler": args.scheduler,
            "seeds": args.seeds,
        },
    )
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    manifest = io.read_manifest(run_dir)
    scenario_dir = manifest.options.get("scenario")
    if scenario_dir and Path(scenario_dir).is_dir():
        scenario = io.load_scenario(scenario_dir)
    else:
        scenario = build_scenario(io.load_config(run_dir / io.CONFIG_FILE))
    solution = io.read_solution(run_dir, scenario)
    solution.check(scenario.eligible)
    report = metrics_report(solution, scenario)
    out = Path(args.out) if args.out else run_dir
    io.write_report(out, report, solution, scenario)
    if out != run_dir:
        io.atomic_write_text(out / io.CONFIG_FILE, io.dump_config(scenario.config))
    io.write_manifest(
        out,
        io.RunManifest(
            subcommand="report",
            config_path=manifest.config_path,
            seed=manifest.seed,
            version=io.version_string(),
            options={"run": str(run_dir.resolve()), "source": manifest.subcommand},
            output_dir=str(out.resolve()),
        ),
    )
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML scenario config")
    common.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="eicic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="drop a scenario and write it out")
    p.add_argument("--dump-rates", action="store_true", help="also write the rate table CSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="joint association/ABS/RB optimisation")
    p.add_argument("--scenario", metavar="DIR", help="directory written by generate")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-8, help="relative utility tolerance")
    p.add_argument("--association", choices=[HEURISTIC, RELAXED_ROUNDED], default=HEURISTIC)
    p.add_argument("--schedule", choices=["closed", "pf"], default="pf")
    p.add_argument("--dump-rates", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", parents=[common], help="RSRP association with fixed ABS")
    p.add_argument("--scenario", metavar="DIR")
    p.add_argument("--association", choices=[MAX_RSRP, BIASED_RSRP], default=MAX_RSRP)
    p.add_argument("--bias-db", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--scheduler", choices=[PF, ROUND_ROBIN], default=PF)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", parents=[common], help="CRE bias x ABS fraction grid")
    p.add_argument("--scenario", metavar="DIR")
    p.add_argument("--bias-grid", type=_parse_grid, default=_parse_grid("0:18:6"))
    p.add_argument("--beta-grid", type=_parse_grid, default=_parse_grid("0:0.5:0.1"))
    p.add_argument("--scheduler", choices=[PF, ROUND_ROBIN], default=PF)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="metrics for a solve/baseline run")
    p.add_argument("run", metavar="RUN_DIR", help="output directory of solve or baseline")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.out is None and args.command != "report":
        args.out = f"eicic-{args.command}"
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"eicic: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"eicic: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"eicic: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
