"""Command-line entry point: ``ddslt <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .decoder import decoding_curve
from .graph_gen import generate_connected_rgg, radius_for
from .simulator import SimConfig, StorageSnapshot, run_dissemination
from .soliton import ideal_soliton, make_distribution


def _float_grid(text: str) -> tuple[float, ...]:
    """'1.0:2.5:0.25' (inclusive range) or '1,1.5,2'."""
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(round((hi - lo) / step))
            return tuple(round(lo + i * step, 10) for i in range(count + 1))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use lo:hi:step or a,b,c") from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _common(threads: bool = False) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="governs all randomness")
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    if threads:
        p.add_argument("--threads", type=int, default=1, help="worker processes; never changes results")
    return p


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--c1", type=float, default=5.0)
    p.add_argument("--radius-coeff", type=float, default=2.0)
    p.add_argument("--dist", choices=("ideal", "robust"), default="ideal")
    p.add_argument("--c", type=float, default=0.1, help="Robust Soliton constant c")
    p.add_argument("--delta", type=float, default=0.5, help="Robust Soliton failure bound delta")
    p.add_argument("--payload-len", type=int, default=16)
    p.add_argument("--snapshot-every", type=int, default=1)


def _sim_config(a, **over) -> SimConfig:
    cfg = SimConfig(
        n=a.n,
        k=a.k,
        c1=a.c1,
        radius_coeff=a.radius_coeff,
        dist_kind=a.dist,
        robust_c=a.c,
        robust_delta=a.delta,
        payload_len=a.payload_len,
        seed=a.seed,
        snapshot_every=a.snapshot_every,
    )
    return replace(cfg, **over)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddslt", description="LT-code distributed storage simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", parents=[_common()], help="write a connected random geometric graph as JSON")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--radius-coeff", type=float, default=2.0)
    p.add_argument("--max-retries", type=int, default=100)

    p = sub.add_parser("dist", parents=[_common()], help="tabulate a Soliton distribution")
    p.add_argument("--kind", choices=("ideal", "robust"), default="ideal")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.5)

    p = sub.add_parser("simulate", parents=[_common()], help="run one dissemination")
    _sim_flags(p)
    p.add_argument("--policy", choices=("ddslt", "ltcds1"), default="ddslt")
    p.add_argument("--trace-out", default=None, help="trace CSV path (default: <out>.trace.csv)")
    p.add_argument("--events-out", default=None, help="optional JSON-lines receive log")

    p = sub.add_parser("decode-eval", parents=[_common()], help="decoding probability of a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--eta-grid", type=_float_grid, default=(1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--criterion", choices=("rank", "peel"), default="rank")

    for name in ("fig1", "fig2", "fig3", "fig4", "table1", "bound"):
        p = sub.add_parser(name, parents=[_common(threads=True)], help=f"reproduce {name}")
        _sim_flags(p)
        p.add_argument("--seeds", type=int, default=10 if name == "fig2" else 20)
        if name == "fig1":
            p.add_argument("--r-values", type=_float_grid, default=(1.5, 2.0, 2.5))
            p.add_argument("--c1-grid", type=_float_grid, default=ex.ExperimentSpec("fig1").c1_grid)
        if name == "fig2":
            p.add_argument("--eta-grid", type=_float_grid, default=(1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5))
            p.add_argument("--trials", type=int, default=200)
            p.add_argument("--criterion", choices=("rank", "peel"), default="rank")
        if name == "bound":
            p.add_argument("--d", type=int, default=None, help="evaluate the bound for one degree and exit")
            p.add_argument("--L", type=int, default=None, help="walk length (default ceil(c1 n ln n))")
            p.add_argument("--sigma-d", type=int, default=None, help="sum of code degrees")
    return parser


def _cmd_gen_graph(a) -> None:
    g = generate_connected_rgg(a.n, radius_for(a.n, a.radius_coeff), a.seed, a.max_retries)
    _emit(g.to_json() + "\n", a.out)


def _cmd_dist(a) -> None:
    dist = make_distribution(a.kind, a.k, a.c, a.delta)
    lines = ["degree,pmf,cdf"] + [f"{i + 1},{p!r},{c!r}" for i, (p, c) in enumerate(zip(dist.pmf, dist.cdf))]
    _emit("\n".join(lines) + "\n", a.out)


def _cmd_simulate(a) -> None:
    cfg = _sim_config(a, policy=a.policy, record_events=a.events_out is not None)
    snap, trace, _ = run_dissemination(cfg)
    _emit(snap.to_json() + "\n", a.out)
    trace_out = a.trace_out
    if trace_out is None and a.out not in (None, "-"):
        trace_out = str(Path(a.out).with_suffix(".trace.csv"))
    if trace_out is not None:
        Path(trace_out).write_text(trace.to_csv())
    if a.events_out is not None:
        Path(a.events_out).write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in trace.events))
    print(f"total_transmissions={trace.total_transmissions} rounds={trace.rounds}", file=sys.stderr)


def _cmd_decode_eval(a) -> None:
    snap = StorageSnapshot.from_json(Path(a.snapshot).read_text())
    probs = decoding_curve(snap, a.eta_grid, a.trials, a.seed, a.criterion)
    lines = ["eta,success_prob,trials"] + [f"{e!r},{p!r},{a.trials}" for e, p in zip(a.eta_grid, probs)]
    _emit("\n".join(lines) + "\n", a.out)


def _cmd_bound_point(a) -> None:
    if a.sigma_d is None:
        raise ValueError("--sigma-d is required with --d")
    L = a.L if a.L is not None else ex.walk_length(a.n, a.c1)
    b = ex.BoundInputs(a.d, a.k, L, a.sigma_d, ideal_soliton(a.k))
    _emit(f"{ex.acceptance_bound(b):.3f}\n", a.out)


def _cmd_experiment(a) -> None:
    if a.command == "bound" and a.d is not None:
        return _cmd_bound_point(a)
    kw = dict(experiment=a.command, base=_sim_config(a), seeds=a.seeds, seed=a.seed, workers=a.threads)
    if a.command == "fig1":
        kw.update(r_values=a.r_values, c1_grid=a.c1_grid)
    if a.command == "fig2":
        kw.update(eta_grid=a.eta_grid, trials=a.trials, criterion=a.criterion)
    result = ex.run_experiment(ex.ExperimentSpec(**kw))
    _emit(result.table.to_csv(), a.out)
    if a.command == "table1":
        med = ", ".join(f"{k}={v:.4f}" for k, v in result.medians.items())
        print(f"median SLEM: {med}", file=sys.stderr)
    if a.command == "fig3":
        summary = ", ".join(f"{k}={statistics.fmean(v):.4f}" for k, v in result.tv.items())
        print(f"mean TV to ideal: {summary}", file=sys.stderr)


COMMANDS = {
    "gen-graph": _cmd_gen_graph,
    "dist": _cmd_dist,
    "simulate": _cmd_simulate,
    "decode-eval": _cmd_decode_eval,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS.get(args.command, _cmd_experiment)(args)
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic for any runtime failure
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main())
