"""Command-line interface.

Subcommands: run, sweep, verify, analyze, suggest-frame.  Exit codes:
0 success, 2 invariant/claim violation, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, InvariantViolation
from .games import load_game
from .harness import (
    ExperimentConfig,
    analyze,
    run_experiment,
    suggest_frame_size,
    sweep,
    verify,
)
from .trace import __version__

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; config problems are 3 here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(3)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--game", required=True,
                   help="game JSON path or builtin:two-node")
    p.add_argument("--algo", default="gnum",
                   choices=["gnum", "cnum", "exact-gradient", "loglinear"])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--c", type=float, default=None,
                   help="experimentation exponent (default: node count + 1)")
    p.add_argument("--k", type=int, default=1, help="window length (slots)")
    p.add_argument("--horizon", type=int, default=100_000,
                   help="total slots for the windowed engine")
    p.add_argument("--frame-len", type=int, default=10_000,
                   help="slots per frame for framed engines")
    p.add_argument("--frames", type=int, default=200,
                   help="number of frames for framed engines")
    p.add_argument("--step-kind", default="decreasing",
                   choices=["decreasing", "fixed"])
    p.add_argument("--step-size", type=float, default=0.1,
                   help="fixed step size when --step-kind=fixed")
    p.add_argument("--step-scale", type=float, default=1.0,
                   help="scale b0 of the decreasing schedule b0/l")
    p.add_argument("--lambda0", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=20.0,
                   help="inverse temperature of the softmax baseline")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--seeds", type=_ints, default=[0],
                   help="comma-separated seed list (may be empty)")
    p.add_argument("--outdir", default="runs")
    p.add_argument("--stride", type=int, default=1,
                   help="record every stride-th slot in slot traces")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--count-states", action="store_true",
                   help="accumulate exact state occupation counts (small games)")
    p.add_argument("--workers", type=int, default=1)


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        game=args.game,
        algo=args.algo,
        epsilon=args.epsilon,
        c=args.c,
        k=args.k,
        horizon=args.horizon,
        frame_len=args.frame_len,
        n_frames=args.frames,
        step_kind=args.step_kind,
        step_size=args.step_size,
        step_scale=args.step_scale,
        lambda0=args.lambda0,
        beta=args.beta,
        eta=args.eta,
        seeds=tuple(args.seeds),
        outdir=args.outdir,
        stride=args.stride,
        figures=not args.no_figures,
        count_states=args.count_states,
        workers=args.workers,
    )


def _cmd_run(args) -> int:
    result = run_experiment(_experiment_config(args))
    for run in result["runs"]:
        print(f"seed {run['seed']}: {run['csv']}")
        for fig in run["figures"]:
            print(f"  figure: {fig}")
    if not result["runs"]:
        print("no seeds requested; nothing to do")
    return 0


def _cmd_sweep(args) -> int:
    raw = [x for x in args.values.split(",") if x.strip() != ""]
    if not raw:
        raise ConfigError("sweep needs at least one value")
    values: list = []
    for item in raw:
        try:
            values.append(int(item))
        except ValueError:
            try:
                values.append(float(item))
            except ValueError:
                values.append(item)
    results = sweep(_experiment_config(args), args.param, values)
    for res in results:
        print(f"{args.param}={res['value']}: {len(res['runs'])} runs in {res['outdir']}")
    return 0


def _cmd_verify(args) -> int:
    env = load_game(args.game)
    report = verify(
        env,
        k=args.k,
        c=args.c,
        eps_values=args.eps,
        tv_horizon=args.tv_horizon,
        n_price_checks=args.price_checks,
        seed=args.seed,
        state_cap=args.state_cap,
    )
    for check in report["checks"]:
        print(f"[{check['status'].upper():>7}] {check['name']}: {check['detail']}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(f"report: {args.json}")
    print(f"overall: {report['status']}")
    return 0 if report["status"] == "pass" else 2


def _cmd_analyze(args) -> int:
    env = load_game(args.game)
    lam = args.lam if args.lam is None else list(args.lam)
    report = analyze(
        env,
        kind=args.kind,
        k=args.k,
        c=args.c,
        lam=lam,
        eps_values=args.eps,
        zeta=args.zeta,
        tv_horizon=args.tv_horizon,
        outdir=args.outdir,
        dot=args.dot,
        render=not args.no_figures,
        state_cap=args.state_cap,
    )
    print(f"states: {report['state_count']}")
    print(f"stable: {', '.join(report['stable_states'])}")
    for entry in report["per_epsilon"]:
        print(
            f"eps={entry['epsilon']:g}: stable mass {entry['mass_on_stable']:.4f}, "
            f"mixing bound {entry['mixing_time_bound']:.4g} slots"
        )
    if "report_path" in report:
        print(f"report: {report['report_path']}")
    return 0


def _cmd_suggest_frame(args) -> int:
    print(suggest_frame_size(args.nodes, args.v_bound, args.eta, args.epsilon, args.c))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ucnum",
        description=(
            "Simulate and analyze completely uncoupled utility-maximization "
            "dynamics on finite payoff games."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="execute one engine over a seed list")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="re-run an experiment over one parameter")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="ExperimentConfig field to vary, e.g. epsilon")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values for the swept field")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="certify headline claims on one game")
    p_verify.add_argument("--game", required=True)
    p_verify.add_argument("--k", type=int, default=1)
    p_verify.add_argument("--c", type=float, default=None)
    p_verify.add_argument("--eps", type=_floats, default=[0.2, 0.1, 0.05])
    p_verify.add_argument("--tv-horizon", type=int, default=1000)
    p_verify.add_argument("--price-checks", type=int, default=20)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--state-cap", type=int, default=20_000)
    p_verify.add_argument("--json", default=None, help="also write the report here")
    p_verify.set_defaults(func=_cmd_verify)

    p_an = sub.add_parser("analyze", help="full perturbed-chain report")
    p_an.add_argument("--game", required=True)
    p_an.add_argument("--kind", default="gnum", choices=["gnum", "cnum"])
    p_an.add_argument("--k", type=int, default=1)
    p_an.add_argument("--c", type=float, default=None)
    p_an.add_argument("--lam", type=_floats, default=None,
                      help="frozen price vector for the price-driven chain")
    p_an.add_argument("--eps", type=_floats, default=[0.2, 0.1, 0.05])
    p_an.add_argument("--zeta", type=float, default=0.01)
    p_an.add_argument("--tv-horizon", type=int, default=500)
    p_an.add_argument("--outdir", default="analysis")
    p_an.add_argument("--dot", action="store_true",
                      help="also write the resistance digraph in DOT form")
    p_an.add_argument("--no-figures", action="store_true")
    p_an.add_argument("--state-cap", type=int, default=20_000)
    p_an.set_defaults(func=_cmd_analyze)

    p_sf = sub.add_parser("suggest-frame",
                          help="frame length for a target non-stationarity error")
    p_sf.add_argument("--nodes", type=int, required=True)
    p_sf.add_argument("--v-bound", type=float, required=True)
    p_sf.add_argument("--eta", type=float, required=True)
    p_sf.add_argument("--epsilon", type=float, required=True)
    p_sf.add_argument("--c", type=float, required=True)
    p_sf.set_defaults(func=_cmd_suggest_frame)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
