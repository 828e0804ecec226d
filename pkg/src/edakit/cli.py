"""Command-line entry point: ``edakit task ...`` and ``edakit dmp ...``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from . import dmp, tasks
from .robotmodel import RobotFileError
from .sim import SimulationDivergence

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


def _vector(text):
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got '{text}'") from None


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    key, value = text.split("=", 1)
    return key.strip().replace("-", "_"), value.strip()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors; exit status 2 is reserved for numerics
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="edakit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    task = sub.add_parser("task", help="run one of the demonstration tasks")
    task.add_argument("name", choices=tasks.TASKS)
    task.add_argument("--config", type=Path, help="key = value parameter file")
    task.add_argument("--robot", help="robot description file")
    task.add_argument("--out", type=Path, help="trace CSV to write")
    task.add_argument("--dt", type=float)
    task.add_argument("--duration", type=float)
    task.add_argument("--kp", type=float)
    task.add_argument("--bp", type=float)
    task.add_argument("--integrator", choices=("semi-implicit-euler", "rk4"))
    task.add_argument("--set", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
                      help="override any task parameter (repeatable)")

    dmp_cmd = sub.add_parser("dmp", help="learn or roll out movement primitives")
    dsub = dmp_cmd.add_subparsers(dest="dmp_command", required=True, parser_class=_Parser)

    learn = dsub.add_parser("learn", help="fit weights to a demonstration")
    learn.add_argument("--demo", type=Path, help="demonstration CSV (t,x,...); synthetic if omitted")
    learn.add_argument("--seed", type=int, help="seed for the synthetic demonstration")
    learn.add_argument("--out", type=Path, required=True, help="model file (JSON)")
    learn.add_argument("--n", type=int, default=100, help="number of basis functions")
    learn.add_argument("--window", type=float, default=0.165, help="smoothing window [s]")
    learn.add_argument("--alpha-z", type=float, default=1000.0)
    learn.add_argument("--beta-z", type=float, default=250.0)
    learn.add_argument("--tau", type=float, default=7.0)

    roll = dsub.add_parser("rollout", help="integrate a learned model")
    roll.add_argument("--model", type=Path, required=True)
    roll.add_argument("--out", type=Path, required=True)
    roll.add_argument("--xi", type=_vector, help="start point")
    roll.add_argument("--xg", type=_vector, help="goal point")
    roll.add_argument("--T", type=float, help="duration [s], default tau")
    roll.add_argument("--dt", type=float, default=1e-3)

    synth = dsub.add_parser("synth", help="write the synthetic demonstration CSV")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--seed", type=int)
    return parser


def format_summary(task, summary):
    return " ".join([f"task={task}"] + [f"{k}={v!r}" for k, v in summary.items()])


def cmd_task(args):
    overrides = tasks.read_config_file(args.config) if args.config else {}
    for key in ("robot", "dt", "duration", "kp", "bp", "integrator"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    overrides.update(dict(args.set))
    result = tasks.run_task(args.name, overrides)
    if args.out:
        result.trace.to_csv(args.out)
    print(format_summary(args.name, result.summary))
    return EXIT_OK


def cmd_learn(args):
    if args.demo is None:
        t, x = dmp.synthetic_letter(seed=args.seed)
        names = ("x", "y")
        demo_path = None
    else:
        t, x, names = dmp.read_demo_csv(args.demo)
        demo_path = args.demo
    if x.shape[0] < 3:
        raise dmp.DmpError(f"need >= 3 samples, got {x.shape[0]}")
    demo = dmp.preprocess_demo(x, dmp.sample_rate(t), args.window, dim_names=names)
    base = dmp.DmpModel.create(x.shape[1], N=args.n, alpha_z=args.alpha_z, beta_z=args.beta_z,
                               tau=args.tau, dim_names=names)
    model = dmp.imitation_llsq(demo, base)
    A, B = dmp.regression_targets(model, demo)
    res = float(dmp.residual(model.weights, A, B))
    rmse = dmp.rollout_rmse(dmp.dmp_rollout(model, T=t[-1] - t[0]), t - t[0], x)
    args.out.write_text(model.to_json())
    span = float(np.linalg.norm(np.ptp(x, axis=0)))
    print(f"demo={demo_path or 'synthetic'} residual={res!r} rmse={rmse!r} "
          f"rmse_rel={rmse / span if span > 0 else float('nan')!r}")
    return EXIT_OK


def cmd_rollout(args):
    model = dmp.DmpModel.from_json(args.model.read_text())
    roll = dmp.dmp_rollout(model, x_i=args.xi, x_g=args.xg, dt=args.dt, T=args.T)
    names = model.dim_names or tuple(f"x{i + 1}" for i in range(model.n))
    header = ",".join(["t", *names, *(f"{n}d" for n in names)])
    np.savetxt(args.out, np.column_stack([roll.times, roll.x, roll.xd]), delimiter=",",
               header=header, comments="", fmt="%.17g")
    print(f"rows={len(roll.times)} final={roll.x[-1].tolist()}")
    return EXIT_OK


def cmd_synth(args):
    t, x = dmp.synthetic_letter(seed=args.seed)
    dmp.write_demo_csv(args.out, t, x)
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if args.command == "task":
        handler = cmd_task
    else:
        handler = {"learn": cmd_learn, "rollout": cmd_rollout, "synth": cmd_synth}[args.dmp_command]
    try:
        return handler(args)
    except (SimulationDivergence, dmp.DivergenceError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (tasks.ConfigError, RobotFileError, dmp.DmpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
