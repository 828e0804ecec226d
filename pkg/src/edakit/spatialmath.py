"""3-D vector helpers and the SO(3) exponential / logarithm maps."""
import numpy as np

from ._jit import USE_NUMBA, jit

SMALL_ANGLE = 1e-7
NEAR_PI = np.pi - 1e-6
ORTHO_TOL = 1e-9


class RotationError(ValueError):
    """Raised when a matrix is not a valid rotation."""


@jit
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


if USE_NUMBA:
    # explicit loops: BLAS call overhead dominates at 3x3 inside compiled code
    @jit
    def mv3(A, x):
        out = np.empty(3)
        for i in range(3):
            out[i] = A[i, 0] * x[0] + A[i, 1] * x[1] + A[i, 2] * x[2]
        return out

    @jit
    def mm3(A, B):
        out = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
        return out
else:
    def mv3(A, x):
        return A @ x

    def mm3(A, B):
        return A @ B


@jit
def skew_kernel(v):
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@jit
def exp_kernel(omega):
    sq = omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2
    theta = np.sqrt(sq)
    if theta < SMALL_ANGLE:
        a = 1.0
        b = 0.5
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / sq
    # I + a K + b K^2 with K^2 = w w^T - |w|^2 I
    x, y, z = omega[0], omega[1], omega[2]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 + b * (x * x - sq)
    R[1, 1] = 1.0 + b * (y * y - sq)
    R[2, 2] = 1.0 + b * (z * z - sq)
    R[0, 1] = b * x * y - a * z
    R[1, 0] = b * x * y + a * z
    R[0, 2] = b * x * z + a * y
    R[2, 0] = b * x * z - a * y
    R[1, 2] = b * y * z - a * x
    R[2, 1] = b * y * z + a * x
    return R


@jit
def log_kernel(R):
    # vee(R - R^T) = 2 sin(theta) * axis
    w = np.empty(3)
    w[0] = R[2, 1] - R[1, 2]
    w[1] = R[0, 2] - R[2, 0]
    w[2] = R[1, 0] - R[0, 1]
    s = 0.5 * np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    theta = np.arctan2(s, c)
    if theta < SMALL_ANGLE:
        return 0.5 * (1.0 + theta * theta / 6.0) * w
    if theta > NEAR_PI:
        # symmetric part = cos(theta) I + (1 - cos(theta)) a a^T
        A = 0.5 * (R + R.T)
        for i in range(3):
            A[i, i] -= c
        A /= 1.0 - c
        k = 0
        if A[1, 1] > A[k, k]:
            k = 1
        if A[2, 2] > A[k, k]:
            k = 2
        axis = A[:, k] / np.sqrt(A[k, k])
        axis /= np.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
        if axis[0] * w[0] + axis[1] * w[1] + axis[2] * w[2] < 0.0:
            axis = -axis
        return theta * axis
    return (0.5 * theta / np.sin(theta)) * w


def skew(v):
    """Matrix ``S`` with ``S @ w == cross(v, w)``."""
    return skew_kernel(np.asarray(v, dtype=float))


def so3_exp(omega):
    """Rodrigues formula: rotation by ``|omega|`` about ``omega / |omega|``."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,) or not np.all(np.isfinite(omega)):
        raise ValueError("omega must be a finite 3-vector")
    return exp_kernel(omega)


def check_rotation(R, tol=ORTHO_TOL):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise RotationError("rotation must be a finite 3x3 matrix")
    err = np.linalg.norm(R.T @ R - np.eye(3))
    if err > tol:
        raise RotationError(f"matrix is not orthonormal (|R^T R - I| = {err:.3e})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise RotationError(f"matrix is not a proper rotation (det = {det:.12f})")
    return R


def so3_log(R):
    """Rotation vector ``theta * axis`` of ``R`` with ``theta`` in ``[0, pi]``.

    Inputs that are not orthonormal to within 1e-9 are rejected rather than
    projected.
    """
    return log_kernel(np.ascontiguousarray(check_rotation(R)))


def rot_x(angle):
    return so3_exp(np.array([angle, 0.0, 0.0]))


def rot_y(angle):
    return so3_exp(np.array([0.0, angle, 0.0]))


def rot_z(angle):
    return so3_exp(np.array([0.0, 0.0, angle]))


def project_to_so3(M):
    """Nearest rotation in the Frobenius sense (polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt
