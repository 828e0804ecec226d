"""Time the hot kernels with numba enabled and with the pure-numpy fallback.

Each backend runs in its own interpreter because the flag is read at import:

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit


def measure(repeat):
    import numpy as np

    from edakit import _jit, dmp
    from edakit.impedance import ControlTarget, ImpedanceGains, assemble_torque
    from edakit.primitives import Constant, VirtualTrajectory
    from edakit.robotmodel import bias_forces, forward_kinematics, jacobians, mass_matrix, shipped_robot
    from edakit.sim import SimConfig, run_closed_loop

    rng = np.random.default_rng(0)
    m = shipped_robot("iiwa14")
    q, qd = rng.uniform(-1.5, 1.5, 7), rng.normal(size=7)
    pose = forward_kinematics(m, q)
    gains = ImpedanceGains.create(7)
    target = ControlTarget(pose.p + 0.01, np.zeros(3), pose.R)
    vt = VirtualTrajectory([Constant(pose.p + 0.02)])
    model = dmp.DmpModel.create(2, weights=rng.normal(size=(2, 100)) * 50)
    cases = {
        "jacobians": (lambda: jacobians(m, q), 2000),
        "mass_matrix": (lambda: mass_matrix(m, q), 2000),
        "bias_forces": (lambda: bias_forces(m, q, qd), 200),
        "impedance_torque": (lambda: assemble_torque(m, q, qd, target, gains), 2000),
        "dmp_rollout_7s": (lambda: dmp.dmp_rollout(model, [0, 0], [0.1, 0.1], T=7.0), 3),
        "closed_loop_0.2s": (lambda: run_closed_loop(m, gains, vt, pose.R, None, SimConfig(0.2), q), 1),
    }
    out = {"numba": _jit.USE_NUMBA}
    for name, (fn, number) in cases.items():
        fn()  # compile or load from cache
        out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        print(json.dumps(measure(args.repeat)))
        return
    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, EDAKIT_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        results[flag] = json.loads(proc.stdout.splitlines()[-1])
    fast, slow = results["1"], results["0"]
    print(f"{'kernel':<18}{'numba':>12}{'numpy':>12}{'speed-up':>10}")
    for name in fast:
        if name == "numba":
            continue
        print(f"{name:<18}{fast[name] * 1e6:>10.1f}us{slow[name] * 1e6:>10.1f}us"
              f"{slow[name] / fast[name]:>9.1f}x")


if __name__ == "__main__":
    main()
