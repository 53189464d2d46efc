"""Command line entry point: ``obstacle-lab run`` and ``obstacle-lab list``."""

from __future__ import annotations

import argparse
import json
import sys

from .kernels import BACKEND
from .scenarios import SCENARIOS, ConfigError, ScenarioConfig, run_scenario

EXIT_USAGE = 2


def _eps_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eps expects comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obstacle-lab", description="Evolutionary p-Laplace obstacle problem laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one named scenario")
    run.add_argument("--scenario", required=True, help="scenario name (see 'list')")
    run.add_argument("--config", help="flat JSON config file; command line values override it")
    run.add_argument("--nx", type=int)
    run.add_argument("--nt", type=int)
    run.add_argument("--p", type=float)
    run.add_argument("--eps", type=_eps_list, help="eps value or comma-separated decreasing list")
    run.add_argument("--out", help="output directory (default: out)")
    run.add_argument("--seed", type=int)
    run.add_argument("--solver", choices=["newton", "gs"])

    sub.add_parser("list", help="list scenarios")
    return ap


def _load_config(args) -> ScenarioConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data["scenario"] = args.scenario
    overrides = {"nx": args.nx, "nt": args.nt, "p": args.p, "eps_list": args.eps,
                 "out": args.out, "seed": args.seed, "solver": args.solver}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        width = max(map(len, SCENARIOS))
        for name, desc in SCENARIOS.items():
            print(f"{name:<{width}}  {desc}")
        return 0

    if args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; valid names:", file=sys.stderr)
        for name in SCENARIOS:
            print(f"  {name}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load_config(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    ok, summary = run_scenario(cfg)
    status = "PASS" if ok else "FAIL"
    print(f"{cfg.scenario}: {status} ({summary['metrics'].get('seconds', 0):.2f} s, kernels={BACKEND})")
    for name in summary["failed"]:
        print(f"  failed: {name}")
    if "error" in summary:
        print(f"  error: {summary['error']}", file=sys.stderr)
    print(f"  summary: {cfg.out}/summary.json")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
