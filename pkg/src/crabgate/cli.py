"""``crabgate`` command line: gate runs, truth tables, sweeps and frames.

Exit status is 0 on success, 1 when a simulation or configuration error
occurs and 2 on usage errors. The seed falls back to ``$CRABGATE_SEED`` and
then to 0 when ``--seed`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import __version__
from .experiments import (SweepConfig, default_lambda_grid, sweep_external_noise,
                          sweep_inherent_perturbation, write_csv)
from .gates import (OUTPUT_LABELS, UNRESOLVED, GateRunResult, decision_bits, load_layout,
                    run_gate, truth_table)
from .metrics import P_MAX_DEFAULT
from .render import FORMATS, TrailRecorder, render_frame
from .swarm import ModelParams, make_rng

SEED_ENV = "CRABGATE_SEED"
_DEFAULTS = ModelParams()
_FMT = argparse.ArgumentDefaultsHelpFormatter


class UsageError(Exception):
    pass


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value < 1:
            raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
        return value
    return parse


def _non_negative(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _model_flags(p: argparse.ArgumentParser, many: bool = False) -> None:
    if many:
        p.add_argument("--p", type=_positive(int), nargs="+", default=None, metavar="INT",
                       help="numbers of potential transitions to sweep")
        p.add_argument("--lambda", dest="lam", type=_non_negative, nargs="+", default=None,
                       metavar="REAL", help="external noise amplitudes to sweep")
    else:
        p.add_argument("--p", type=_positive(int), default=_DEFAULTS.num_transitions,
                       metavar="INT", help="number of potential transitions")
        p.add_argument("--lambda", dest="lam", type=_non_negative,
                       default=_DEFAULTS.noise_amplitude, metavar="REAL",
                       help="external noise amplitude")
    p.add_argument("--alpha", type=float, default=_DEFAULTS.alpha, metavar="DEG",
                   help="angular range of potential transitions")
    p.add_argument("--wall-weight", type=_unit_interval, default=_DEFAULTS.wall_weight,
                   metavar="REAL", help="blend weight of wall flow")
    p.add_argument("--seed", type=_seed, default=None, metavar="U64",
                   help=f"master seed; falls back to ${SEED_ENV}, then 0")


def _gate_flags(p: argparse.ArgumentParser, layout_required: bool = True) -> None:
    p.add_argument("--layout", required=layout_required, default=None if layout_required else "and.map",
                   metavar="PATH", help="layout file or bundled name (or.map, and.map)")
    p.add_argument("--agents", type=_positive(int), default=40, metavar="N",
                   help="agents per active input")
    p.add_argument("--max-steps", type=_positive(int), default=1000, metavar="INT",
                   help="step limit per run")
    p.add_argument("--decision", choices=("fraction", "difference"), default="fraction",
                   help="output decision rule")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crabgate",
        description="Lattice swarm simulator with collision-based logic gates.",
        formatter_class=_FMT,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    run = sub.add_parser("run", help="run one gate evaluation", formatter_class=_FMT)
    _gate_flags(run)
    _model_flags(run)
    run.add_argument("--inputs", choices=("00", "01", "10", "11"), default="11",
                     help="input bits x y")
    run.add_argument("--out", metavar="PATH", help="directory for CSV output and snapshots")
    run.add_argument("--snap-every", type=_positive(int), default=None, metavar="INT",
                     help="write a frame every INT steps (needs --out)")
    run.add_argument("--format", choices=FORMATS, default="ppm", help="snapshot image format")

    tt = sub.add_parser("truth-table", help="truth table over seeded trials", formatter_class=_FMT)
    _gate_flags(tt)
    _model_flags(tt)
    tt.add_argument("--trials", type=_positive(int), default=100, metavar="INT",
                    help="trials per input pair")
    tt.add_argument("--out", metavar="PATH", help="also write the table as CSV")

    sn = sub.add_parser("sweep-noise", help="gate success rate against external noise", formatter_class=_FMT)
    _gate_flags(sn, layout_required=False)
    _model_flags(sn, many=True)
    sn.add_argument("--inputs", choices=("01", "10", "11"), default="11",
                    help="input bits x y")
    sn.add_argument("--trials", type=_positive(int), default=100, metavar="INT",
                    help="trials per grid cell")
    sn.add_argument("--out", metavar="PATH", help="CSV destination; stdout when omitted")

    sp = sub.add_parser("sweep-perturbation", help="polarization and density against P", formatter_class=_FMT)
    _model_flags(sp, many=True)
    sp.add_argument("--agents", type=_positive(int), default=100, metavar="N",
                    help="agents in the arena")
    sp.add_argument("--trials", type=_positive(int), default=1, metavar="INT",
                    help="seeded runs averaged per P")
    sp.add_argument("--size", type=_positive(int), nargs=2, default=(100, 100),
                    metavar=("W", "H"), help="torus arena size")
    sp.add_argument("--warmup", type=int, default=500, metavar="INT", help="steps before measuring")
    sp.add_argument("--measure", type=_positive(int), default=500, metavar="INT",
                    help="steps averaged per run")
    sp.add_argument("--p-max", type=_positive(int), default=P_MAX_DEFAULT, metavar="INT",
                    help="normaliser of the inherent perturbation")
    sp.add_argument("--out", metavar="PATH", help="CSV destination; stdout when omitted")

    rd = sub.add_parser("render", help="render the state of a gate run after some steps", formatter_class=_FMT)
    _gate_flags(rd)
    _model_flags(rd)
    rd.add_argument("--inputs", choices=("00", "01", "10", "11"), default="11",
                    help="input bits x y")
    rd.add_argument("--frame", type=int, default=0, metavar="INT",
                    help="step index of the rendered frame")
    rd.add_argument("--format", choices=FORMATS, default="ppm", help="image format")
    rd.add_argument("--out", required=True, metavar="PATH", help="image file to write")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    text = os.environ.get(SEED_ENV)
    if text is None or text == "":
        return 0
    try:
        return _seed(text)
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"{SEED_ENV}={text!r} is not an unsigned 64-bit integer") from None


def _params(args, p=None, lam=None) -> ModelParams:
    return ModelParams(
        num_transitions=args.p if p is None else p,
        alpha=args.alpha,
        noise_amplitude=args.lam if lam is None else lam,
        wall_weight=args.wall_weight,
        seed=args.seed,
    )


def _bits(text: str) -> tuple[int, int]:
    return int(text[0]), int(text[1])


def _open_out(path):
    return sys.stdout if path is None else open(path, "w", newline="")


def cmd_run(args) -> int:
    if args.snap_every is not None and args.out is None:
        raise UsageError("--snap-every needs --out")
    layout = load_layout(args.layout)
    params = _params(args)
    inputs = _bits(args.inputs)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    on_step = None
    if args.snap_every is not None:
        trails = TrailRecorder(5)

        def on_step(index, world, agents):
            trails.record(agents)
            if index % args.snap_every == 0:
                image = render_frame(world, agents, trails.as_dict(), fmt=args.format)
                (out / f"frame_{index:06d}.{args.format}").write_bytes(image)

    if any(inputs):
        result = run_gate(layout, inputs, params, args.max_steps, make_rng(params.seed),
                          args.agents, on_step=on_step)
    else:
        result = GateRunResult({k: 0 for k in OUTPUT_LABELS} | {UNRESOLVED: 0}, 0, 0)
    bits = decision_bits(layout, result, args.decision)

    print(f"layout {layout.name}  inputs {args.inputs}  agents {result.n_agents}  "
          f"steps {result.steps_used}")
    for key in OUTPUT_LABELS + (UNRESOLVED,):
        print(f"  {key:>10}: {result.counts[key]}")
    print("decision " + " ".join(f"{k}={v}" for k, v in bits.items()))

    if out is not None:
        with open(out / "counts.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["output", "count"])
            for key in OUTPUT_LABELS + (UNRESOLVED,):
                w.writerow([key, result.counts[key]])
        with open(out / "telemetry.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "n_anticipation", "n_following", "n_wander", "n_stayed",
                        "polarization", "density"])
            for t in result.telemetry:
                w.writerow([t.step, t.n_anticipation, t.n_following, t.n_wander, t.n_stayed,
                            repr(t.polarization), repr(t.density)])
    return 0


def cmd_truth_table(args) -> int:
    layout = load_layout(args.layout)
    rows = truth_table(layout, _params(args), args.agents, args.trials, args.seed,
                       args.max_steps, decision=args.decision)
    keys = sorted(rows[0].outputs)
    print("x y | " + " ".join(keys) + " | success")
    for row in rows:
        x, y = row.inputs
        print(f"{x} {y} | " + " ".join(str(row.outputs[k]) for k in keys)
              + f" | {row.success:.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", *keys, "success", "trials"])
            for row in rows:
                w.writerow([*row.inputs, *(row.outputs[k] for k in keys), repr(row.success),
                            row.trials])
    return 0


def cmd_sweep_noise(args) -> int:
    config = SweepConfig(
        p_values=args.p or [1, 20],
        lambda_values=args.lam if args.lam is not None else default_lambda_grid(),
        trials=args.trials,
        layout=args.layout,
        inputs=_bits(args.inputs),
        n_agents=args.agents,
        max_steps=args.max_steps,
        decision=args.decision,
        seed=args.seed,
    )
    base = ModelParams(alpha=args.alpha, wall_weight=args.wall_weight, seed=args.seed)
    rows = sweep_external_noise(config, base, load_layout(config.layout))
    _emit(rows, args.out)
    return 0


def cmd_sweep_perturbation(args) -> int:
    if args.lam is not None and any(v != 0.0 for v in args.lam):
        raise UsageError("sweep-perturbation runs without external noise; drop --lambda")
    if args.warmup < 0:
        raise UsageError("--warmup must be >= 0")
    config = SweepConfig(
        p_values=args.p or [1, 2, 4, 8, 16, 24, 31],
        p_max=args.p_max,
        trials=args.trials,
        width=args.size[0],
        height=args.size[1],
        n_agents=args.agents,
        warmup_steps=args.warmup,
        measure_steps=args.measure,
        seed=args.seed,
    )
    base = ModelParams(alpha=args.alpha, wall_weight=args.wall_weight, seed=args.seed)
    _emit(sweep_inherent_perturbation(config, base), args.out)
    return 0


def _emit(rows, path):
    write_csv(rows, sys.stdout if path is None else path)


def cmd_render(args) -> int:
    if args.frame < 0:
        raise UsageError("--frame must be >= 0")
    layout = load_layout(args.layout)
    params = _params(args)
    inputs = _bits(args.inputs)
    trails = TrailRecorder(5)
    frames = {}

    def on_step(index, world, agents):
        # the run stops early once every agent is absorbed; keep the latest frame
        trails.record(agents)
        frames["image"] = render_frame(world, agents, trails.as_dict(), fmt=args.format)

    if any(inputs):
        run_gate(layout, inputs, params, max(args.frame, 1), make_rng(params.seed),
                 args.agents, on_step=lambda i, w, a: on_step(i, w, a) if i <= args.frame else None)
    else:
        on_step(0, layout.world(), [])
    Path(args.out).write_bytes(frames["image"])
    return 0


_COMMANDS = {
    "run": cmd_run,
    "truth-table": cmd_truth_table,
    "sweep-noise": cmd_sweep_noise,
    "sweep-perturbation": cmd_sweep_perturbation,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.seed = _resolve_seed(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"crabgate: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"crabgate: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
