"""The three demonstration tasks: sequencing, discrete plus rhythmic, draw and erase.

Each task builds its virtual trajectory from primitives, brings the arm to
the start pose with an unrecorded pre-roll, simulates the closed loop and
returns the recorded :class:`~edakit.sim.Trace` with a short summary.
"""
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dmp
from .impedance import ImpedanceGains
from .primitives import (Constant, Embedded, Oscillation, Submovement, VirtualTrajectory,
                         time_reverse)
from .robotmodel import forward_kinematics, load_robot_file, parse_sections
from .sim import ContactPlane, SimConfig, drawn_points, erased_mask, run_closed_loop
from .spatialmath import rot_y

DATA = Path(__file__).parent / "data"
PREROLL = 3.0  # s, excluded from traces
PREROLL_MOVE = 2.0  # s of the pre-roll spent moving, the rest settles

# flange z axis pointing forward (+x) or down (-z)
FORWARD = rot_y(np.pi / 2)
DOWN = rot_y(np.pi)

DEFAULTS = {
    "common": {
        "robot": str(DATA / "iiwa14.robot"),
        "dt": 1e-3,
        "record_every": 3,
        "integrator": "semi-implicit-euler",
        "bq": 1.0,
        "kr": 50.0,
        "br": 5.0,
        "tool": np.zeros(3),
    },
    "sequence": {
        "p1": np.array([0.6735, 0.1396, 0.2048]),
        "p2": np.array([0.6735, 0.3396, 0.4048]),
        "p3": np.array([0.6735, 0.4396, 0.3048]),
        "T1": 2.0,
        "T2": 2.0,
        "t_i": 0.5,
        "t_g": 1.5,
        "kp": 800.0,
        "bp": 80.0,
        "duration": 10.0,
        "q_seed": np.array([0.31, 1.09, -0.09, -1.55, 0.31, -1.07, -0.07]),
    },
    "combine": {
        "p1": np.array([0.5735, 0.0, 0.5048]),
        "p2": np.array([0.5735, 0.35, 0.5048]),
        "T1": 1.5,
        "t_i": 0.5,
        "radius": 0.03,
        "omega": 3 * np.pi,
        "plane": "YZ",
        "kp": 800.0,
        "bp": 80.0,
        "duration": 10.0,
        "q_seed": np.array([0.0, 0.33, 0.0, -1.92, 0.0, -0.68, 0.0]),
    },
    "drawerase": {
        "demo": str(DATA / "letter_demo.csv"),
        "n_basis": 100,
        "alpha_z": 1000.0,
        "beta_z": 250.0,
        "tau": 7.0,
        "window": 0.165,
        "origin": np.array([0.5, -0.1]),  # table position of the demonstration's (0, 0)
        "table": 0.10,  # h_z [m]
        "epsilon": 0.005,  # pen pushed below the table surface [m]
        "tool": np.array([0.0, 0.0, 0.12]),  # pen tip in the flange frame
        "kp": 400.0,
        "bp": 40.0,
        "kp_erase": 800.0,
        "bp_erase": 80.0,
        "radius": 0.03,
        "omega": 2 * np.pi,
        "hold": 1.0,  # erase time after the reversed path has finished [s]
        "contact_k": 1e4,
        "contact_b": 100.0,
        "contact_mu": 10.0,
        "rollout_dt": 1e-3,
        "q_seed": np.array([-0.2, 0.73, 0.01, -1.8, -0.01, 0.61, -0.19]),
    },
}
TASKS = ("sequence", "combine", "drawerase")


class ConfigError(ValueError):
    pass


def task_config(task, overrides=None):
    """Merged parameter dict for ``task``; overrides may be strings or values."""
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}'; choose from {', '.join(TASKS)}")
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[task])
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ConfigError(f"unknown parameter '{key}' for task {task}")
        cfg[key] = _coerce(key, value, cfg[key])
    cfg["task"] = task
    return cfg


def _coerce(key, value, default):
    if not isinstance(value, str):
        return np.asarray(value, dtype=float) if isinstance(default, np.ndarray) else value
    if isinstance(default, np.ndarray):
        try:
            arr = np.array([float(v) for v in value.replace(",", " ").split()])
        except ValueError:
            raise ConfigError(f"bad value for '{key}': '{value}'") from None
        if arr.shape != default.shape:
            raise ConfigError(f"'{key}' needs {default.size} numbers, got {arr.size}")
        return arr
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for '{key}': '{value}'") from None
    return value


def read_config_file(path):
    """``key = value`` lines (robot-file grammar); sections are ignored."""
    out = {}
    for _, _, keys in parse_sections(Path(path).read_text()):
        for key, (value, _) in keys.items():
            out[key.replace("-", "_")] = value
    return out


def _gains(cfg, n, kp=None, bp=None):
    return ImpedanceGains.create(n, kp=cfg["kp"] if kp is None else kp,
                                 bp=cfg["bp"] if bp is None else bp,
                                 kr=cfg["kr"], br=cfg["br"], bq=cfg["bq"])


def _sim_config(cfg, duration):
    return SimConfig(duration=duration, dt=cfg["dt"], record_every=int(cfg["record_every"]),
                     integrator=cfg["integrator"])


def _model(cfg):
    path = Path(cfg["robot"])
    if not path.exists():
        raise ConfigError(f"robot file not found: {path}")
    return load_robot_file(path).with_tool(cfg["tool"])


def preroll(model, gains, start, R0, q_seed, cfg, plane=None):
    """Regulate from ``q_seed`` to the tool pose ``(start, R0)``; returns the final state."""
    p_seed = forward_kinematics(model, q_seed).p
    vt = VirtualTrajectory([Submovement.between(p_seed, start, 0.0, PREROLL_MOVE)])
    trace = run_closed_loop(model, gains, vt, R0, plane, _sim_config(cfg, PREROLL), q_seed)
    return trace.final_state()


def summarize(trace, wall_time):
    return {
        "final_error": float(np.linalg.norm(trace.p[-1] - trace.x0[-1])),
        "peak_force": float(trace.fn.max()),
        "wall_time": wall_time,
    }


@dataclass
class TaskResult:
    trace: object
    summary: dict
    vt: object = None
    extra: dict = None


def sequence_trajectory(cfg, second=True):
    sub1 = Submovement.between(cfg["p1"], cfg["p2"], cfg["t_i"], cfg["T1"])
    terms = [sub1]
    if second:
        # follow-up movement is displacement only so the sum converges to p3
        terms.append(Submovement(cfg["t_g"], cfg["T2"], cfg["p3"] - cfg["p2"]))
    return VirtualTrajectory(terms)


def combine_trajectory(cfg):
    sub = Submovement.between(cfg["p1"], cfg["p2"], cfg["t_i"], cfg["T1"])
    osc = Oscillation(cfg["radius"], cfg["omega"], plane=cfg["plane"])
    return VirtualTrajectory([sub, osc])


def run_sequence(cfg, second=True):
    start = time.perf_counter()
    model = _model(cfg)
    gains = _gains(cfg, model.n)
    vt = sequence_trajectory(cfg, second)
    state = preroll(model, gains, cfg["p1"], FORWARD, cfg["q_seed"], cfg)
    trace = run_closed_loop(model, gains, vt, FORWARD, None, _sim_config(cfg, cfg["duration"]),
                            state.q, state.qdot)
    return TaskResult(trace, summarize(trace, time.perf_counter() - start), vt)


def run_combine(cfg):
    start = time.perf_counter()
    model = _model(cfg)
    gains = _gains(cfg, model.n)
    vt = combine_trajectory(cfg)
    state = preroll(model, gains, cfg["p1"], FORWARD, cfg["q_seed"], cfg)
    trace = run_closed_loop(model, gains, vt, FORWARD, None, _sim_config(cfg, cfg["duration"]),
                            state.q, state.qdot)
    return TaskResult(trace, summarize(trace, time.perf_counter() - start), vt)


def learn_demo(path, n_basis=100, alpha_z=1000.0, beta_z=250.0, tau=7.0, window=0.165):
    """Preprocess a demonstration CSV and fit DMP weights; returns ``(model, demo, raw)``."""
    t, x, names = dmp.read_demo_csv(path)
    if x.shape[0] < 3:
        raise dmp.DmpError(f"need >= 3 samples, got {x.shape[0]}")
    rate = dmp.sample_rate(t)
    demo = dmp.preprocess_demo(x, rate, window, dim_names=names)
    base = dmp.DmpModel.create(x.shape[1], N=n_basis, alpha_z=alpha_z, beta_z=beta_z, tau=tau,
                               dim_names=names)
    return dmp.imitation_llsq(demo, base), demo, (t, x)


def run_drawerase(cfg):
    start = time.perf_counter()
    model = _model(cfg)
    model_dmp, demo, _ = learn_demo(cfg["demo"], int(cfg["n_basis"]), cfg["alpha_z"],
                                    cfg["beta_z"], cfg["tau"], cfg["window"])
    if model_dmp.n != 2:
        raise ConfigError("drawing demonstrations must be two-dimensional")
    rollout = dmp.dmp_rollout(model_dmp, dt=cfg["rollout_dt"])
    T = rollout.duration
    pen_z = cfg["table"] - cfg["epsilon"]
    anchor = Constant(np.array([cfg["origin"][0], cfg["origin"][1], pen_z]))
    plane = ContactPlane(cfg["table"], cfg["contact_k"], cfg["contact_b"], cfg["contact_mu"])

    draw_vt = VirtualTrajectory([Embedded(rollout, (0, 1)), anchor])
    erase_vt = VirtualTrajectory([Embedded(time_reverse(rollout, T), (0, 1)),
                                  Oscillation(cfg["radius"], cfg["omega"], plane="XY"), anchor])

    draw_gains = _gains(cfg, model.n)
    erase_gains = _gains(cfg, model.n, cfg["kp_erase"], cfg["bp_erase"])
    x_start, _ = draw_vt.evaluate(0.0)
    state = preroll(model, draw_gains, x_start, DOWN, cfg["q_seed"], cfg, plane)
    draw = run_closed_loop(model, draw_gains, draw_vt, DOWN, plane, _sim_config(cfg, T),
                           state.q, state.qdot)
    state = draw.final_state()
    erase = run_closed_loop(model, erase_gains, erase_vt, DOWN, plane,
                            _sim_config(cfg, T + cfg["hold"]), state.q, state.qdot)
    # the erase phase starts from the last draw sample, which it re-records
    erase = erase.shifted(draw.t[-1])
    trace = draw.concat(erase.select(slice(1, None)))
    summary = summarize(trace, time.perf_counter() - start)
    ink = drawn_points(draw)
    wipe = drawn_points(erase)
    extra = {
        "draw_steps": len(draw.t),
        "draw_contact_fraction": float(np.mean(draw.fn > 0.5)),
        "drawn_points": ink,
        "wipe_points": wipe,
        "erased_fraction": float(np.mean(erased_mask(ink, wipe, cfg["radius"]))) if len(ink) else 1.0,
        "draw": draw,
        "erase": erase,
    }
    summary["contact_fraction"] = extra["draw_contact_fraction"]
    summary["erased_fraction"] = extra["erased_fraction"]
    return TaskResult(trace, summary, (draw_vt, erase_vt), extra)


RUNNERS = {"sequence": run_sequence, "combine": run_combine, "drawerase": run_drawerase}


def run_task(task, overrides=None):
    return RUNNERS[task](task_config(task, overrides))
