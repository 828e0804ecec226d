"""Serial-chain kinematics and gravity-free rigid-body dynamics.

Kinematics use the product of exponentials in the space frame: every joint
is described by its unit axis and a point on that axis, both expressed in the
home configuration (q = 0). Jacobians are reported at the tool tip.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._jit import USE_NUMBA, jit
from .spatialmath import RotationError, check_rotation, exp_kernel, mm3, mv3

FD_STEP = 1e-6


class RobotFileError(ValueError):
    """Malformed or invalid robot-description document."""


@dataclass(frozen=True)
class RobotDescription:
    axes: np.ndarray  # (n, 3) unit joint axes, home frame
    origins: np.ndarray  # (n, 3) point on each joint axis, home frame [m]
    masses: np.ndarray  # (n,) [kg]
    coms: np.ndarray  # (n, 3) link centres of mass, home frame [m]
    inertias: np.ndarray  # (n, 3, 3) about the COM, home frame [kg m^2]
    ee_position: np.ndarray  # flange position at home [m]
    ee_rotation: np.ndarray  # flange orientation at home
    tool_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))  # flange frame [m]
    rotor: np.ndarray = None  # (n,) reflected rotor inertia [kg m^2]
    name: str = ""

    def __post_init__(self):
        n = len(self.masses)
        if self.rotor is None:
            object.__setattr__(self, "rotor", np.zeros(n))
        for key in ("axes", "origins", "masses", "coms", "inertias", "ee_position",
                    "ee_rotation", "tool_offset", "rotor"):
            arr = np.ascontiguousarray(getattr(self, key), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def n(self):
        return len(self.masses)

    @property
    def tip_home(self):
        """Tool-tip position at q = 0."""
        return self.ee_position + self.ee_rotation @ self.tool_offset

    def with_tool(self, offset):
        return replace(self, tool_offset=np.asarray(offset, dtype=float))

    def arrays(self):
        """Argument tuple consumed by the compiled kernels."""
        return (self.axes, self.origins, self.masses, self.coms, self.inertias,
                np.ascontiguousarray(self.ee_rotation), np.ascontiguousarray(self.tip_home),
                self.rotor)


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray


@dataclass(frozen=True)
class Pose:
    p: np.ndarray
    R: np.ndarray


# ---------------------------------------------------------------------------
# robot-description files

def _floats(value, count, lineno, key):
    try:
        vals = [float(tok) for tok in value.split()]
    except ValueError:
        raise RobotFileError(f"line {lineno}: '{key}' expects numbers, got '{value}'") from None
    if len(vals) != count:
        raise RobotFileError(f"line {lineno}: '{key}' expects {count} numbers, got {len(vals)}")
    if not np.all(np.isfinite(vals)):
        raise RobotFileError(f"line {lineno}: '{key}' has non-finite values")
    return vals


def parse_sections(text):
    """Split a ``[section]`` / ``key = value`` document.

    Returns a list of ``(section, header_line, {key: (value, line)})``.
    Shared by robot descriptions and task configuration files.
    """
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise RobotFileError(f"line {lineno}: unterminated section header")
            current = (" ".join(line[1:-1].split()), lineno, {})
            sections.append(current)
            continue
        if "=" not in line:
            raise RobotFileError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if current is None:
            current = ("", 0, {})
            sections.append(current)
        if key in current[2]:
            raise RobotFileError(f"line {lineno}: duplicate key '{key}'")
        current[2][key] = (value, lineno)
    return sections


def load_robot(text, name=""):
    """Build a validated :class:`RobotDescription` from document text."""
    joints, links = {}, {}
    ee = tool = None
    for section, header, keys in parse_sections(text):
        kind, _, index = section.partition(" ")
        if kind in ("joint", "link"):
            try:
                i = int(index)
            except ValueError:
                raise RobotFileError(f"line {header}: bad section index '{index}'") from None
            table = joints if kind == "joint" else links
            if i in table:
                raise RobotFileError(f"line {header}: duplicate section [{section}]")
            table[i] = (header, keys)
        elif kind == "ee":
            ee = (header, keys)
        elif kind == "tool":
            tool = (header, keys)
        else:
            raise RobotFileError(f"line {header}: unknown section [{section}]")

    n = len(joints)
    if n == 0:
        raise RobotFileError("line 1: description has no joints (n = 0)")
    if sorted(joints) != list(range(1, n + 1)):
        raise RobotFileError(f"joint sections must be numbered 1..{n}, got {sorted(joints)}")
    if sorted(links) != list(range(1, n + 1)):
        raise RobotFileError(f"link sections must match joints 1..{n}, got {sorted(links)}")
    if ee is None:
        raise RobotFileError("missing [ee] section")

    def need(section, key):
        header, keys = section
        if key not in keys:
            raise RobotFileError(f"line {header}: missing key '{key}'")
        return keys[key]

    axes, origins, rotor = np.zeros((n, 3)), np.zeros((n, 3)), np.zeros(n)
    masses, coms, inertias = np.zeros(n), np.zeros((n, 3)), np.zeros((n, 3, 3))
    for i in range(1, n + 1):
        value, ln = need(joints[i], "axis")
        axis = np.array(_floats(value, 3, ln, "axis"))
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise RobotFileError(f"line {ln}: non-unit axis (|axis| = {np.linalg.norm(axis):.6g})")
        axes[i - 1] = axis
        value, ln = need(joints[i], "origin")
        origins[i - 1] = _floats(value, 3, ln, "origin")
        if "rotor" in joints[i][1]:
            value, ln = joints[i][1]["rotor"]
            (rotor[i - 1],) = _floats(value, 1, ln, "rotor")
            if rotor[i - 1] < 0:
                raise RobotFileError(f"line {ln}: rotor inertia must be >= 0")

        value, ln = need(links[i], "mass")
        (masses[i - 1],) = _floats(value, 1, ln, "mass")
        if masses[i - 1] <= 0:
            raise RobotFileError(f"line {ln}: mass must be > 0")
        value, ln = need(links[i], "com")
        coms[i - 1] = _floats(value, 3, ln, "com")
        value, ln = need(links[i], "inertia")
        ixx, iyy, izz, ixy, ixz, iyz = _floats(value, 6, ln, "inertia")
        I = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        if np.linalg.eigvalsh(I).min() < -1e-12:
            raise RobotFileError(f"line {ln}: non-PSD inertia")
        inertias[i - 1] = I

    value, ln = need(ee, "origin")
    ee_p = np.array(_floats(value, 3, ln, "origin"))
    if "rotation" in ee[1]:
        value, ln = ee[1]["rotation"]
        ee_R = np.array(_floats(value, 9, ln, "rotation")).reshape(3, 3)
        try:
            check_rotation(ee_R)
        except RotationError as exc:
            raise RobotFileError(f"line {ln}: {exc}") from None
    else:
        ee_R = np.eye(3)
    offset = np.zeros(3)
    if tool is not None:
        value, ln = need(tool, "offset")
        offset = np.array(_floats(value, 3, ln, "offset"))

    return RobotDescription(axes, origins, masses, coms, inertias, ee_p, ee_R, offset,
                            rotor, name=name)


def load_robot_file(path):
    path = Path(path)
    return load_robot(path.read_text(), name=path.stem)


def shipped_robot(name):
    """Load one of the bundled descriptions (``iiwa14``, ``planar2r``, ``single``)."""
    return load_robot_file(Path(__file__).parent / "data" / f"{name}.robot")


# ---------------------------------------------------------------------------
# kernels
#
# chain_frames and mass_kernel exist twice: scalar loops for numba, where
# small temporaries dominate the cost, and array expressions for plain numpy.

if USE_NUMBA:
    @jit
    def chain_frames(axes, origins, q):
        """World axes, axis points and cumulative transforms for every joint.

        ``Rc[i], pc[i]`` is the product of the first ``i + 1`` joint
        exponentials, i.e. the transform that moves link ``i``.
        """
        n = q.shape[0]
        w = np.empty((n, 3))
        r = np.empty((n, 3))
        Rc = np.empty((n, 3, 3))
        pc = np.empty((n, 3))
        R = np.eye(3)
        p = np.zeros(3)
        Rn = np.empty((3, 3))
        for i in range(n):
            o = origins[i]
            for a in range(3):
                w[i, a] = R[a, 0] * axes[i, 0] + R[a, 1] * axes[i, 1] + R[a, 2] * axes[i, 2]
                r[i, a] = R[a, 0] * o[0] + R[a, 1] * o[1] + R[a, 2] * o[2] + p[a]
            Ri = exp_kernel(axes[i] * q[i])
            # p += R (o - Ri o)
            d0 = o[0] - (Ri[0, 0] * o[0] + Ri[0, 1] * o[1] + Ri[0, 2] * o[2])
            d1 = o[1] - (Ri[1, 0] * o[0] + Ri[1, 1] * o[1] + Ri[1, 2] * o[2])
            d2 = o[2] - (Ri[2, 0] * o[0] + Ri[2, 1] * o[1] + Ri[2, 2] * o[2])
            for a in range(3):
                p[a] += R[a, 0] * d0 + R[a, 1] * d1 + R[a, 2] * d2
                for b in range(3):
                    Rn[a, b] = R[a, 0] * Ri[0, b] + R[a, 1] * Ri[1, b] + R[a, 2] * Ri[2, b]
            for a in range(3):
                pc[i, a] = p[a]
                for b in range(3):
                    R[a, b] = Rn[a, b]
                    Rc[i, a, b] = Rn[a, b]
        return w, r, Rc, pc

    @jit
    def mass_kernel(axes, origins, masses, coms, inertias, rotor, q):
        w, r, Rc, pc = chain_frames(axes, origins, q)
        n = q.shape[0]
        M = np.zeros((n, n))
        Jv = np.empty((n, 3))
        Iw = np.empty((3, 3))
        T = np.empty((3, 3))
        Iwj = np.empty(3)
        c = np.empty(3)
        for i in range(n):
            M[i, i] += rotor[i]
            R = Rc[i]
            I = inertias[i]
            for a in range(3):
                c[a] = R[a, 0] * coms[i, 0] + R[a, 1] * coms[i, 1] + R[a, 2] * coms[i, 2] + pc[i, a]
                for b in range(3):
                    T[a, b] = R[a, 0] * I[0, b] + R[a, 1] * I[1, b] + R[a, 2] * I[2, b]
            for a in range(3):
                for b in range(3):
                    Iw[a, b] = T[a, 0] * R[b, 0] + T[a, 1] * R[b, 1] + T[a, 2] * R[b, 2]
            for j in range(i + 1):
                d0 = c[0] - r[j, 0]
                d1 = c[1] - r[j, 1]
                d2 = c[2] - r[j, 2]
                Jv[j, 0] = w[j, 1] * d2 - w[j, 2] * d1
                Jv[j, 1] = w[j, 2] * d0 - w[j, 0] * d2
                Jv[j, 2] = w[j, 0] * d1 - w[j, 1] * d0
            m = masses[i]
            for j in range(i + 1):
                for a in range(3):
                    Iwj[a] = Iw[a, 0] * w[j, 0] + Iw[a, 1] * w[j, 1] + Iw[a, 2] * w[j, 2]
                for k in range(j + 1):
                    val = m * (Jv[j, 0] * Jv[k, 0] + Jv[j, 1] * Jv[k, 1] + Jv[j, 2] * Jv[k, 2])
                    val += w[k, 0] * Iwj[0] + w[k, 1] * Iwj[1] + w[k, 2] * Iwj[2]
                    M[j, k] += val
                    if k != j:
                        M[k, j] += val
        return M
else:
    def chain_frames(axes, origins, q):
        n = q.shape[0]
        w = np.empty((n, 3))
        r = np.empty((n, 3))
        Rc = np.empty((n, 3, 3))
        pc = np.empty((n, 3))
        R = np.eye(3)
        p = np.zeros(3)
        for i in range(n):
            w[i] = R @ axes[i]
            r[i] = R @ origins[i] + p
            Ri = exp_kernel(axes[i] * q[i])
            p = p + R @ (origins[i] - Ri @ origins[i])
            R = R @ Ri
            Rc[i] = R
            pc[i] = p
        return w, r, Rc, pc

    def mass_kernel(axes, origins, masses, coms, inertias, rotor, q):
        w, r, Rc, pc = chain_frames(axes, origins, q)
        n = q.shape[0]
        c = np.einsum("iab,ib->ia", Rc, coms) + pc
        Iw = Rc @ inertias @ Rc.transpose(0, 2, 1)
        below = np.tril(np.ones((n, n)))[:, :, None]  # joint j moves link i iff j <= i
        Jv = np.cross(np.broadcast_to(w[None], (n, n, 3)), c[:, None, :] - r[None, :, :]) * below
        Jw = w[None] * below
        M = np.einsum("i,ija,ika->jk", masses, Jv, Jv)
        M += np.einsum("ija,iab,ikb->jk", Jw, Iw, Jw)
        return M + np.diag(rotor)


@jit
def fk_kernel(axes, origins, ee_R, tip_home, q):
    w, r, Rc, pc = chain_frames(axes, origins, q)
    n = q.shape[0]
    return mv3(Rc[n - 1], tip_home) + pc[n - 1], mm3(Rc[n - 1], ee_R)


@jit
def jacobian_kernel(axes, origins, ee_R, tip_home, q):
    w, r, Rc, pc = chain_frames(axes, origins, q)
    n = q.shape[0]
    p = mv3(Rc[n - 1], tip_home) + pc[n - 1]
    Jp = np.empty((3, n))
    Jr = np.empty((3, n))
    for i in range(n):
        d0 = p[0] - r[i, 0]
        d1 = p[1] - r[i, 1]
        d2 = p[2] - r[i, 2]
        Jp[0, i] = w[i, 1] * d2 - w[i, 2] * d1
        Jp[1, i] = w[i, 2] * d0 - w[i, 0] * d2
        Jp[2, i] = w[i, 0] * d1 - w[i, 1] * d0
        Jr[0, i] = w[i, 0]
        Jr[1, i] = w[i, 1]
        Jr[2, i] = w[i, 2]
    return p, mm3(Rc[n - 1], ee_R), Jp, Jr


@jit
def bias_kernel(axes, origins, masses, coms, inertias, rotor, q, qd):
    """Coriolis/centrifugal vector from Christoffel symbols of a central-difference dM/dq."""
    n = q.shape[0]
    dM = np.empty((n, n, n))
    qp = q.copy()
    for k in range(n):
        qp[k] = q[k] + FD_STEP
        Mp = mass_kernel(axes, origins, masses, coms, inertias, rotor, qp)
        qp[k] = q[k] - FD_STEP
        Mm = mass_kernel(axes, origins, masses, coms, inertias, rotor, qp)
        qp[k] = q[k]
        dM[k] = (Mp - Mm) / (2.0 * FD_STEP)
    # c_i = sum_k (dM_k qd)_i qd_k - 1/2 qd^T dM_i qd
    Mdot = np.zeros((n, n))
    for k in range(n):
        Mdot += dM[k] * qd[k]
    c = Mdot @ qd
    for i in range(n):
        c[i] -= 0.5 * (qd @ (dM[i] @ qd))
    return c


# ---------------------------------------------------------------------------
# public API

def _joint_vector(model, v, name="q"):
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (model.n,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({model.n},)")
    return v


def forward_kinematics(model, q):
    """Tool-tip pose at configuration ``q``."""
    q = _joint_vector(model, q)
    p, R = fk_kernel(model.axes, model.origins, model.ee_rotation, model.tip_home, q)
    return Pose(p, R)


def jacobians(model, q):
    """Translational and rotational Jacobians ``(Jp, Jr)`` at the tool tip."""
    q = _joint_vector(model, q)
    _, _, Jp, Jr = jacobian_kernel(model.axes, model.origins, model.ee_rotation, model.tip_home, q)
    return Jp, Jr


def mass_matrix(model, q):
    q = _joint_vector(model, q)
    return mass_kernel(model.axes, model.origins, model.masses, model.coms, model.inertias,
                       model.rotor, q)


def bias_forces(model, q, qdot):
    """``C(q, qdot) qdot`` with gravity omitted."""
    q = _joint_vector(model, q)
    qdot = _joint_vector(model, qdot, "qdot")
    return bias_kernel(model.axes, model.origins, model.masses, model.coms, model.inertias,
                       model.rotor, q, qdot)


def link_velocities(model, q, qdot):
    """World-frame COM velocity and angular velocity of each link.

    Computed by propagating twists link to link; independent of
    :func:`mass_matrix`, which makes it usable as an energy cross-check.
    """
    q = _joint_vector(model, q)
    qdot = _joint_vector(model, qdot, "qdot")
    w, r, Rc, pc = chain_frames(model.axes, model.origins, q)
    omega = np.zeros(3)
    v0 = np.zeros(3)  # linear velocity of the point at the world origin
    vc, wc, Iw = [], [], []
    for i in range(model.n):
        omega = omega + w[i] * qdot[i]
        v0 = v0 + np.cross(r[i], w[i]) * qdot[i]
        c = Rc[i] @ model.coms[i] + pc[i]
        vc.append(v0 + np.cross(omega, c))
        wc.append(omega.copy())
        Iw.append(Rc[i] @ model.inertias[i] @ Rc[i].T)
    return np.array(vc), np.array(wc), np.array(Iw)


def kinetic_energy(model, q, qdot):
    vc, wc, Iw = link_velocities(model, q, qdot)
    qdot = np.asarray(qdot, dtype=float)
    T = 0.5 * np.sum(model.rotor * qdot ** 2)
    for i in range(model.n):
        T += 0.5 * model.masses[i] * vc[i] @ vc[i] + 0.5 * wc[i] @ Iw[i] @ wc[i]
    return T


__all__ = [
    "RobotDescription", "JointState", "Pose", "RobotFileError", "load_robot", "load_robot_file",
    "shipped_robot", "forward_kinematics", "jacobians", "mass_matrix", "bias_forces",
    "kinetic_energy", "link_velocities",
]
