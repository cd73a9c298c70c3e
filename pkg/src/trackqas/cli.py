"""Command-line entry point: ``trackqas {generate,search,experiment,aggregate,table2}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .hamiltonians import build_vqe_hamiltonian, build_vqls_system
from .mcts import reward_vqe, reward_vqls, search
from .toy_detector import generate_event, qubits_for
from .vqls import make_problem


def _load_config(args) -> harness.ExperimentConfig:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.formulation:
        doc["formulation"] = args.formulation
    for flag, key in (("particles", "n_particles"), ("layers", "n_layers"), ("runs", "runs"),
                      ("seed", "seed"), ("out", "output_path"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            doc[key] = value
    if args.fixed_event:
        doc["fixed_event"] = True
    doc["seed"] = harness.seed_from_env(doc.get("seed", 0))
    mcts = dict(doc.get("mcts") or {})
    if args.budget is not None:
        mcts["budget"] = args.budget
    if args.max_depth is not None:
        mcts["max_depth"] = args.max_depth
    if "budget" not in mcts:
        p, l = doc.get("n_particles", 2), doc.get("n_layers", 3)
        mcts["budget"] = harness.default_budget(qubits_for(p, l))
    doc["mcts"] = mcts
    return harness.ExperimentConfig.from_dict(doc)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    seed = harness.seed_from_env(args.seed or 0)
    event = generate_event(args.particles or 2, args.layers or 3, seed)
    _emit(event.to_json() + "\n", args.out)
    return 0


def cmd_search(args) -> int:
    cfg = _load_config(args)
    event = generate_event(cfg.n_particles, cfg.n_layers, cfg.seed)
    n = qubits_for(cfg.n_particles, cfg.n_layers)
    mcts = dataclasses.replace(cfg.mcts, seed=cfg.seed)
    if cfg.formulation == "VQE":
        h = build_vqe_hamiltonian(event, cfg.vqe_params)
        result = search(lambda c: reward_vqe(c, h), n, mcts)
    else:
        harness.check_size(cfg)
        p = cfg.vqls_params
        prob = make_problem(build_vqls_system(event, p.epsilon, p.zeta, p.eta))
        result = search(lambda c: reward_vqls(c, prob), n, mcts)
    _emit(json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n", args.out)
    return 0


def _print_summary(results) -> None:
    sys.stdout.write(harness.summary_csv(harness.aggregate(results)))
    failed = sum(r.error is not None for r in results)
    if failed:
        print(f"{failed} of {len(results)} runs failed", file=sys.stderr)


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    try:
        results = harness.run_experiment(cfg)
    except harness.SizeCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(results)
    return 0


def cmd_aggregate(args) -> int:
    results = []
    for path in args.paths:
        results.extend(harness.load_results(path))
    if not results:
        print("error: no result files found", file=sys.stderr)
        return 1
    _emit(harness.summary_csv(harness.aggregate(results)), args.out and str(Path(args.out)))
    return 0


def cmd_table2(args) -> int:
    seed = harness.seed_from_env(args.seed or 0)
    configs = harness.table2_configs(args.runs or 100, seed, args.out, args.workers or 1,
                                     budget=args.budget, max_depth=args.max_depth or 50)
    results = []
    for cfg in configs:
        results.extend(harness.run_experiment(cfg))
    if args.out:
        (Path(args.out) / "summary.csv").write_text(harness.summary_csv(harness.aggregate(results)))
    _print_summary(results)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--formulation", type=str.upper, choices=harness.FORMULATIONS)
    p.add_argument("--particles", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--workers", type=int)
    p.add_argument("--fixed-event", action="store_true", help="reuse one event for every run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackqas", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("generate", cmd_generate, "emit one toy event as JSON"),
        ("search", cmd_search, "run one MCTS search and print the best circuit"),
        ("experiment", cmd_experiment, "run many seeded pipeline runs"),
        ("table2", cmd_table2, "preset sweep over all problem sizes"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("aggregate", help="summarise result directories into CSV")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
