"""Command line entry point: ``pplab <experiment> ...`` plus a few direct tools."""

from __future__ import annotations

import argparse
import json
import sys

from .arrangement import ArrangementSizeError, candidate_diagram
from .candidate import candidate_set, proxy_set
from .experiments import (
    REGISTRY, ExperimentConfig, csv_text, default_seed, parse_seed, registry_list, run_experiment, write_outputs,
)
from .geometry import SiteSetError, load_site_set
from .random_model import ConfigError

EXIT_OK, EXIT_HARD_FAIL, EXIT_CONFIG = 0, 1, 2

_INT_PARAMS = ("n", "d", "k", "r", "trials", "samples", "queries", "kmax", "rays")
_FLOAT_PARAMS = ("gamma", "delta", "c1")
_LIST_PARAMS = ("ns", "ks")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", help="base seed (unsigned 64-bit); falls back to $PPLAB_SEED")
    p.add_argument("--out", help="CSV output path (manifest goes to <out>.manifest.json); default stdout")
    p.add_argument("--threads", type=int, default=None, help="worker threads for trials")
    for name in _INT_PARAMS:
        p.add_argument(f"--{name}", type=int, default=None)
    for name in _FLOAT_PARAMS:
        p.add_argument(f"--{name}", type=float, default=None)
    for name in _LIST_PARAMS:
        p.add_argument(f"--{name}", type=_int_list, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pplab", description="Seeded experiments on staircases, proxy sets and levels.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list experiments and the claim each one checks")
    for name, exp in REGISTRY.items():
        _add_run_options(sub.add_parser(name, help=exp.claim))

    cand = sub.add_parser("candidate", help="candidate-set tools").add_subparsers(dest="action", required=True)
    q = cand.add_parser("query", help="candidate set (and optionally proxy set) at one query point")
    q.add_argument("--sites", required=True)
    q.add_argument("--x", type=float, required=True)
    q.add_argument("--y", type=float, required=True)
    q.add_argument("--k", type=int, default=None, help="also report the proxy set for this k")

    proxy = sub.add_parser("proxy", help="proxy-set tools").add_subparsers(dest="action", required=True)
    _add_run_options(proxy.add_parser("check", help="containment of candidate sets in proxy sets"))

    diag = sub.add_parser("diagram", help="candidate diagram tools").add_subparsers(dest="action", required=True)
    b = diag.add_parser("build", help="build the candidate diagram of a small site set")
    b.add_argument("--sites", required=True)
    b.add_argument("--out", default=None)

    lev = sub.add_parser("levels", help="k-level tools").add_subparsers(dest="action", required=True)
    on = lev.add_parser("online", help="k-level vertices under random insertion orders")
    _add_run_options(on)
    on.add_argument("--orders", type=int, default=None, help="number of insertion orders (trials)")
    return parser


def _config_from_args(experiment: str, args) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.setdefault("experiment", experiment)
    if data["experiment"] != experiment:
        raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
    cfg = ExperimentConfig.from_json(data)
    if args.seed is not None:
        cfg.seed = parse_seed(args.seed)
    elif "seed" not in data:
        cfg.seed = default_seed()
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    for name in _INT_PARAMS + _FLOAT_PARAMS + _LIST_PARAMS:
        val = getattr(args, name, None)
        if val is not None:
            cfg.params[name] = val
    if getattr(args, "orders", None) is not None:
        cfg.params["trials"] = args.orders
    return cfg


def _run(experiment: str, args) -> int:
    cfg = _config_from_args(experiment, args)
    result = run_experiment(cfg)
    if cfg.out:
        write_outputs(result, cfg.out)
    else:
        sys.stdout.write(csv_text(result))
        print(json.dumps(result.manifest, sort_keys=True), file=sys.stderr)
    status = "PASS" if result.passed else "FAIL"
    kind = "hard" if result.hard else "soft"
    print(f"{experiment}: {status} ({kind}) {result.summary}", file=sys.stderr)
    return EXIT_HARD_FAIL if result.hard_failure else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name, kind, claim in registry_list():
                print(f"{name:<20} {kind:<5} {claim}")
            return EXIT_OK
        if args.command in REGISTRY:
            return _run(args.command, args)
        if args.command == "proxy":
            return _run("containment", args)
        if args.command == "levels":
            return _run("online-klevel", args)
        if args.command == "candidate":
            sites = load_site_set(args.sites)
            out = {"query": [args.x, args.y], "candidates": candidate_set((args.x, args.y), sites).member_ids}
            if args.k is not None:
                if not 1 <= args.k <= len(sites):
                    raise ConfigError(f"k must lie in [1, {len(sites)}]")
                out["proxy"] = proxy_set((args.x, args.y), sites, args.k).member_ids
            print(json.dumps(out))
            return EXIT_OK
        if args.command == "diagram":
            diagram = candidate_diagram(load_site_set(args.sites))
            text = json.dumps(diagram.to_json())
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                print(text)
            V, E, F = diagram.complexity
            print(f"candidate diagram: V={V} E={E} F={F} space={diagram.space_complexity}", file=sys.stderr)
            return EXIT_OK
    except (ConfigError, SiteSetError, ArrangementSizeError, OSError, json.JSONDecodeError) as exc:
        print(f"pplab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
