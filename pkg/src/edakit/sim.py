"""Fixed-step forward dynamics of the torque-controlled arm.

The plant is gravity free (gravity is assumed perfectly compensated) and may
touch a horizontal table modelled as a unilateral penalty spring-damper.
The controller runs at every integration step; the torque is held constant
over the step.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._jit import jit
from .impedance import torque_kernel
from .primitives import compose_eval
from .robotmodel import JointState, _joint_vector, bias_kernel, jacobian_kernel, mass_kernel
from .spatialmath import check_rotation, log_kernel

INTEGRATORS = {"semi-implicit-euler": 0, "rk4": 1}
DRAW_FORCE = 0.5  # N, normal force above which the pen leaves ink


class SimulationDivergence(RuntimeError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"simulation state became non-finite at step {step}")


@dataclass(frozen=True)
class SimConfig:
    duration: float
    dt: float = 1e-3
    record_every: int = 3
    integrator: str = "semi-implicit-euler"

    def __post_init__(self):
        if not (self.dt > 0 and self.duration > 0):
            raise ValueError("dt and duration must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {sorted(INTEGRATORS)}")

    @property
    def nsteps(self):
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class ContactPlane:
    height: float
    stiffness: float = 1e4
    damping: float = 100.0
    viscosity: float = 10.0

    def __post_init__(self):
        if min(self.stiffness, self.damping, self.viscosity) < 0:
            raise ValueError("contact parameters must be non-negative")

    def params(self):
        return np.array([self.height, self.stiffness, self.damping, self.viscosity])


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    p: np.ndarray
    logR: np.ndarray
    x0: np.ndarray
    x0dot: np.ndarray
    tau: np.ndarray
    fn: np.ndarray

    @property
    def n(self):
        return self.q.shape[1]

    def final_state(self):
        return JointState(self.q[-1].copy(), self.qdot[-1].copy())

    def shifted(self, dt):
        return Trace(self.t + dt, *(getattr(self, k) for k in _FIELDS[1:]))

    def select(self, rows):
        return Trace(*(getattr(self, k)[rows] for k in _FIELDS))

    def concat(self, other):
        return Trace(*(np.concatenate([getattr(self, k), getattr(other, k)]) for k in _FIELDS))

    def header(self):
        n = self.n
        cols = (["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"qd{i}" for i in range(1, n + 1)]
                + ["px", "py", "pz", "logRx", "logRy", "logRz", "x0x", "x0y", "x0z"]
                + [f"tau{i}" for i in range(1, n + 1)] + ["fn"])
        return cols

    def to_csv(self, path):
        data = np.column_stack([self.t, self.q, self.qdot, self.p, self.logR, self.x0, self.tau, self.fn])
        np.savetxt(path, data, delimiter=",", header=",".join(self.header()), comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            cols = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = sum(1 for c in cols if c.startswith("tau"))
        i = 1
        parts = []
        for width in (n, n, 3, 3, 3):
            parts.append(data[:, i:i + width])
            i += width
        tau = data[:, i:i + n]
        # velocity of the virtual trajectory is not part of the file format
        return cls(data[:, 0], *parts, np.full_like(parts[-1], np.nan), tau, data[:, -1])


_FIELDS = ("t", "q", "qdot", "p", "logR", "x0", "x0dot", "tau", "fn")


# ---------------------------------------------------------------------------
# kernels

@jit
def contact_kernel(plane, tip_p, tip_v):
    f = np.zeros(3)
    h, kc, bc, mu = plane[0], plane[1], plane[2], plane[3]
    if tip_p[2] >= h:
        return f
    fn = kc * (h - tip_p[2]) - bc * tip_v[2]
    if fn < 0.0:
        fn = 0.0
    f[0] = -mu * tip_v[0]
    f[1] = -mu * tip_v[1]
    f[2] = fn
    return f


@jit
def accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd, tau, plane,
                 has_plane):
    M = mass_kernel(axes, origins, masses, coms, inertias, rotor, q)
    rhs = tau - bias_kernel(axes, origins, masses, coms, inertias, rotor, q, qd)
    fn = 0.0
    if has_plane:
        p, R, Jp, Jr = jacobian_kernel(axes, origins, ee_R, tip_home, q)
        f = contact_kernel(plane, p, Jp @ qd)
        rhs = rhs + Jp.T @ f
        fn = f[2]
    return np.linalg.solve(M, rhs), fn


@jit
def step_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd, tau, plane,
                has_plane, dt, integrator):
    if integrator == 0:
        qdd, fn = accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd,
                               tau, plane, has_plane)
        qd1 = qd + dt * qdd
        return q + dt * qd1, qd1
    a1, _ = accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd, tau,
                         plane, has_plane)
    q2 = q + 0.5 * dt * qd
    qd2 = qd + 0.5 * dt * a1
    a2, _ = accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q2, qd2, tau,
                         plane, has_plane)
    q3 = q + 0.5 * dt * qd2
    qd3 = qd + 0.5 * dt * a2
    a3, _ = accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q3, qd3, tau,
                         plane, has_plane)
    q4 = q + dt * qd3
    qd4 = qd + dt * a3
    a4, _ = accel_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q4, qd4, tau,
                         plane, has_plane)
    qn = q + dt / 6.0 * (qd + 2.0 * qd2 + 2.0 * qd3 + qd4)
    qdn = qd + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return qn, qdn


@jit
def closed_loop_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd,
                       x0s, x0ds, R0, Bq, Kp, Bp, Kr, Br, plane, has_plane, dt, nsteps,
                       record_every, integrator):
    n = q.shape[0]
    nrec = nsteps // record_every + 1
    rq = np.empty((nrec, n))
    rqd = np.empty((nrec, n))
    rp = np.empty((nrec, 3))
    rlog = np.empty((nrec, 3))
    rtau = np.empty((nrec, n))
    rfn = np.empty(nrec)
    status = -1
    j = 0
    for k in range(nsteps + 1):
        tau, p, R, Jp, pdot = torque_kernel(axes, origins, ee_R, tip_home, q, qd, x0s[k], x0ds[k], R0,
                                            Bq, Kp, Bp, Kr, Br)
        if k % record_every == 0:
            rq[j] = q
            rqd[j] = qd
            rp[j] = p
            rlog[j] = log_kernel(R)
            rtau[j] = tau
            if has_plane:
                rfn[j] = contact_kernel(plane, p, pdot)[2]
            else:
                rfn[j] = 0.0
            j += 1
        if k == nsteps:
            break
        if not np.all(np.isfinite(tau)):
            status = k
            break
        q, qd = step_kernel(axes, origins, masses, coms, inertias, rotor, ee_R, tip_home, q, qd, tau,
                            plane, has_plane, dt, integrator)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            status = k
            break
    return rq, rqd, rp, rlog, rtau, rfn, status


# ---------------------------------------------------------------------------
# public API

def _plane_args(plane):
    if plane is None:
        return np.zeros(4), False
    return plane.params(), True


def _inertial(model):
    return (model.axes, model.origins, model.masses, model.coms, model.inertias, model.rotor,
            model.ee_rotation, np.ascontiguousarray(model.tip_home))


def contact_force(plane, tip_p, tip_v):
    """Penalty force of the table on the tool tip; the normal part never pulls."""
    return contact_kernel(plane.params(), np.asarray(tip_p, dtype=float), np.asarray(tip_v, dtype=float))


def joint_acceleration(model, state, tau, plane=None):
    """Returns ``(qdd, normal_force)`` of the plant at ``state``."""
    q = _joint_vector(model, state.q)
    qd = _joint_vector(model, state.qdot, "qdot")
    params, has = _plane_args(plane)
    return accel_kernel(*_inertial(model), q, qd, _joint_vector(model, tau, "tau"), params, has)


def sim_step(model, state, tau, plane=None, dt=1e-3, integrator="semi-implicit-euler"):
    """Advance the plant one step under constant torque ``tau``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    q = _joint_vector(model, state.q)
    qd = _joint_vector(model, state.qdot, "qdot")
    params, has = _plane_args(plane)
    qn, qdn = step_kernel(*_inertial(model), q, qd, _joint_vector(model, tau, "tau"), params, has,
                          dt, INTEGRATORS[integrator])
    if not (np.all(np.isfinite(qn)) and np.all(np.isfinite(qdn))):
        raise SimulationDivergence(0)
    return JointState(qn, qdn)


def simulate_open_loop(model, state, tau, duration, dt=1e-3, integrator="semi-implicit-euler",
                       plane=None):
    """Apply a constant torque for ``duration``; returns the final state."""
    for _ in range(int(round(duration / dt))):
        state = sim_step(model, state, tau, plane, dt, integrator)
    return state


def run_closed_loop(model, gains, vt, R0, plane, cfg, q_init, qdot_init=None, t0=0.0):
    """Simulate the arm under the impedance controller tracking ``vt``.

    ``vt`` is sampled at every step time ``t0 + k * dt``; recorded rows are
    every ``cfg.record_every``-th step, starting at ``t0``.
    """
    q = _joint_vector(model, q_init)
    qd = np.zeros(model.n) if qdot_init is None else _joint_vector(model, qdot_init, "qdot")
    if gains.n != model.n:
        raise ValueError(f"gains are for {gains.n} joints, model has {model.n}")
    R0 = np.ascontiguousarray(check_rotation(R0))
    nsteps = cfg.nsteps
    times = t0 + np.arange(nsteps + 1) * cfg.dt
    x0s, x0ds = compose_eval(vt, times)
    x0s = np.ascontiguousarray(np.reshape(x0s, (nsteps + 1, 3)))
    x0ds = np.ascontiguousarray(np.reshape(x0ds, (nsteps + 1, 3)))
    params, has = _plane_args(plane)
    rq, rqd, rp, rlog, rtau, rfn, status = closed_loop_kernel(
        *_inertial(model), q, qd, x0s, x0ds, R0, gains.Bq, gains.Kp, gains.Bp, gains.Kr, gains.Br,
        params, has, cfg.dt, nsteps, cfg.record_every, INTEGRATORS[cfg.integrator])
    if status >= 0:
        raise SimulationDivergence(status)
    idx = np.arange(0, nsteps + 1, cfg.record_every)
    return Trace(times[idx], rq, rqd, rp, rlog, x0s[idx], x0ds[idx], rtau, rfn)


# ---------------------------------------------------------------------------
# ink bookkeeping for the drawing task

def drawn_points(trace, threshold=DRAW_FORCE):
    """Tool-tip XY positions where the pen pressed harder than ``threshold``."""
    return trace.p[trace.fn > threshold, :2]


def erased_mask(drawn, wipe_points, half_width):
    """True for each drawn point that some wipe contact passed within ``half_width`` of."""
    drawn = np.asarray(drawn, dtype=float)
    wipe = np.asarray(wipe_points, dtype=float)
    if drawn.size == 0:
        return np.zeros(0, dtype=bool)
    if wipe.size == 0:
        return np.zeros(len(drawn), dtype=bool)
    dist, _ = cKDTree(wipe).query(drawn, k=1)
    return dist <= half_width
