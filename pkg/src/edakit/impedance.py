"""Mechanical impedances and Jacobian-transpose torque assembly.

The torque command superimposes a joint-space damper, a translational
spring-damper on the tool-tip position and a rotational spring-damper on the
tool orientation. Task-space forces reach the joints only through
``J^T``; nothing here inverts a Jacobian.
"""
from dataclasses import dataclass

import numpy as np

from ._jit import jit
from .robotmodel import jacobian_kernel, mass_matrix, _joint_vector
from .spatialmath import check_rotation, log_kernel, so3_log

# rotational stiffness and damping are the same on every task
JOINT_DAMPING = 1.0
ROT_STIFFNESS = 50.0
ROT_DAMPING = 5.0


def _sym(M, shape, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M * np.eye(shape)
    if M.shape != (shape, shape) or not np.all(np.isfinite(M)):
        raise ValueError(f"{name} must be a finite {shape}x{shape} matrix")
    M = 0.5 * (M + M.T)
    if np.linalg.eigvalsh(M).min() < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return np.ascontiguousarray(M)


@dataclass(frozen=True)
class ImpedanceGains:
    """Impedance parameters; scalars expand to multiples of the identity.

    Only the symmetric part of each matrix is kept.
    """
    Bq: np.ndarray
    Kp: np.ndarray
    Bp: np.ndarray
    Kr: np.ndarray
    Br: np.ndarray

    def __post_init__(self):
        Bq = np.asarray(self.Bq, dtype=float)
        n = Bq.shape[0] if Bq.ndim == 2 else None
        if n is None:
            raise ValueError("Bq must be an n x n matrix (use ImpedanceGains.create for scalars)")
        object.__setattr__(self, "Bq", _sym(Bq, n, "Bq"))
        for key in ("Kp", "Bp", "Kr", "Br"):
            object.__setattr__(self, key, _sym(getattr(self, key), 3, key))

    @classmethod
    def create(cls, n, kp=800.0, bp=80.0, kr=ROT_STIFFNESS, br=ROT_DAMPING, bq=JOINT_DAMPING):
        return cls(bq * np.eye(n), kp, bp, kr, br)

    @property
    def n(self):
        return self.Bq.shape[0]

    def is_positive_definite(self):
        return all(np.linalg.eigvalsh(M).min() > 0 for M in (self.Bq, self.Kp, self.Bp, self.Kr, self.Br))

    def __add__(self, other):
        return ImpedanceGains(self.Bq + other.Bq, self.Kp + other.Kp, self.Bp + other.Bp,
                              self.Kr + other.Kr, self.Br + other.Br)


@dataclass(frozen=True)
class ControlTarget:
    x0: np.ndarray
    x0dot: np.ndarray
    R0: np.ndarray

    def __post_init__(self):
        for key in ("x0", "x0dot"):
            v = np.ascontiguousarray(getattr(self, key), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{key} must be a finite 3-vector")
            object.__setattr__(self, key, v)
        object.__setattr__(self, "R0", np.ascontiguousarray(check_rotation(self.R0)))


# ---------------------------------------------------------------------------
# kernels

@jit
def torque_kernel(axes, origins, ee_R, tip_home, q, qd, x0, x0d, R0, Bq, Kp, Bp, Kr, Br):
    """Torque command plus the tool-tip quantities it was computed from."""
    p, R, Jp, Jr = jacobian_kernel(axes, origins, ee_R, tip_home, q)
    pdot = Jp @ qd
    omega = Jr @ qd
    force = Kp @ (x0 - p) + Bp @ (x0d - pdot)
    moment = Kr @ (R @ log_kernel(R.T @ R0)) - Br @ omega
    tau = -(Bq @ qd) + Jp.T @ force + Jr.T @ moment
    return tau, p, R, Jp, pdot


# ---------------------------------------------------------------------------
# public API

def joint_damping_torque(gains, qdot):
    return -gains.Bq @ np.asarray(qdot, dtype=float)


def translational_wrench(gains, dp, dpdot):
    """Force ``Kp dp + Bp dpdot`` for position error ``dp = x0 - p``."""
    return gains.Kp @ np.asarray(dp, dtype=float) + gains.Bp @ np.asarray(dpdot, dtype=float)


def rotational_wrench(gains, R, R0, omega):
    """Moment ``Kr R Log(R^T R0) - Br omega`` (spatial frame)."""
    R = check_rotation(R)
    return gains.Kr @ (R @ so3_log(R.T @ check_rotation(R0))) - gains.Br @ np.asarray(omega, dtype=float)


def assemble_torque(model, q, qdot, target, gains):
    """Joint torque of the three superimposed impedances at the tool tip."""
    q = _joint_vector(model, q)
    qdot = _joint_vector(model, qdot, "qdot")
    if gains.n != model.n:
        raise ValueError(f"gains are for {gains.n} joints, model has {model.n}")
    tau, *_ = torque_kernel(model.axes, model.origins, model.ee_rotation, model.tip_home, q, qdot,
                            target.x0, target.x0dot, target.R0, gains.Bq, gains.Kp, gains.Bp,
                            gains.Kr, gains.Br)
    return tau


def energy(model, q, qdot, target, gains):
    """Storage function: kinetic energy plus translational and rotational spring energy."""
    q = _joint_vector(model, q)
    qdot = _joint_vector(model, qdot, "qdot")
    p, R, _, _ = jacobian_kernel(model.axes, model.origins, model.ee_rotation, model.tip_home, q)
    dp = target.x0 - p
    r = log_kernel(R.T @ target.R0)
    return 0.5 * qdot @ mass_matrix(model, q) @ qdot + 0.5 * dp @ gains.Kp @ dp + 0.5 * r @ gains.Kr @ r
