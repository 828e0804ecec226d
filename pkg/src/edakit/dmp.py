"""Discrete Dynamic Movement Primitives and least-squares imitation learning."""
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._jit import jit
from .primitives import SampledTrajectory

DEFAULT_ALPHA_S = float(np.log(100.0))  # s(tau) = 0.01
LOG_TINY = float(np.log(1e-300))


class DmpError(ValueError):
    pass


class DegenerateDimensionError(DmpError):
    def __init__(self, index, name=None):
        self.index = index
        self.name = name if name is not None else str(index)
        super().__init__(f"degenerate dimension {self.name}: demonstration start equals goal")


class DivergenceError(DmpError):
    pass


def basis_centers(N, alpha_s):
    i = np.arange(N)
    return np.exp(-alpha_s * i / (N - 1))


def basis_widths(centers):
    h = np.empty_like(centers)
    h[:-1] = 1.0 / np.diff(centers) ** 2
    h[-1] = h[-2]
    return h


@dataclass(frozen=True)
class DmpModel:
    alpha_s: float
    alpha_z: float
    beta_z: float
    tau: float
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray  # (n, N)
    x_i: np.ndarray = None  # demonstration endpoints, kept for rollout defaults
    x_g: np.ndarray = None
    dim_names: tuple = field(default=None)

    def __post_init__(self):
        for key in ("centers", "widths", "weights"):
            object.__setattr__(self, key, np.array(getattr(self, key), dtype=float))
        for key in ("x_i", "x_g"):
            if getattr(self, key) is not None:
                object.__setattr__(self, key, np.array(getattr(self, key), dtype=float))
        if min(self.alpha_s, self.alpha_z, self.beta_z, self.tau) <= 0:
            raise DmpError("alpha_s, alpha_z, beta_z and tau must be positive")
        N = self.centers.shape[0]
        if N < 2 or self.widths.shape != (N,) or self.weights.ndim != 2 or self.weights.shape[1] != N:
            raise DmpError("inconsistent basis sizes")
        if np.any(np.diff(self.centers) >= 0):
            raise DmpError("basis centers must be strictly decreasing")
        if np.any(self.widths <= 0):
            raise DmpError("basis widths must be positive")

    @classmethod
    def create(cls, n, N=100, alpha_z=1000.0, beta_z=250.0, tau=7.0, alpha_s=DEFAULT_ALPHA_S,
               weights=None, dim_names=None):
        c = basis_centers(N, alpha_s)
        W = np.zeros((n, N)) if weights is None else weights
        return cls(alpha_s, alpha_z, beta_z, tau, c, basis_widths(c), W, dim_names=dim_names)

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def N(self):
        return self.centers.shape[0]

    def with_weights(self, W, x_i=None, x_g=None):
        return replace(self, weights=np.array(W, dtype=float), x_i=x_i, x_g=x_g)

    def to_json(self):
        d = {k: getattr(self, k) for k in ("alpha_s", "alpha_z", "beta_z", "tau")}
        for k in ("centers", "widths", "weights", "x_i", "x_g"):
            v = getattr(self, k)
            d[k] = None if v is None else v.tolist()
        d["dim_names"] = None if self.dim_names is None else list(self.dim_names)
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
            names = d.get("dim_names")
            return cls(float(d["alpha_s"]), float(d["alpha_z"]), float(d["beta_z"]), float(d["tau"]),
                       d["centers"], d["widths"], d["weights"], d.get("x_i"), d.get("x_g"),
                       tuple(names) if names else None)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DmpError(f"bad model file: {exc}") from None


@dataclass(frozen=True)
class DemonstrationSet:
    t: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray
    dim_names: tuple = None

    @property
    def x_i(self):
        return self.x[0]

    @property
    def x_g(self):
        return self.x[-1]


class DmpRollout(SampledTrajectory):
    """Integrated transformation-system output, usable as a trajectory term."""


# ---------------------------------------------------------------------------
# kernels

@jit
def activation_kernel(centers, widths, s):
    """Normalised basis activations times ``s``; NaN when the bases underflow."""
    e = -widths * (s - centers) ** 2
    m = e.max()
    phi = np.exp(e - m)
    total = phi.sum()
    if m + np.log(total) < LOG_TINY:
        return np.full(centers.shape[0], np.nan)
    return phi * (s / total)


@jit
def rollout_kernel(centers, widths, W, alpha_s, alpha_z, beta_z, tau, x_i, x_g, dt, nsteps):
    n = x_i.shape[0]
    xs = np.empty((nsteps + 1, n))
    zs = np.empty((nsteps + 1, n))
    x = x_i.copy()
    z = np.zeros(n)
    scale = x_g - x_i
    xs[0] = x
    zs[0] = z
    status = -1
    for k in range(nsteps):
        t = k * dt
        # RK4 on (x, z); the phase variable is evaluated in closed form
        f1 = scale * (W @ activation_kernel(centers, widths, np.exp(-alpha_s * t / tau)))
        fm = scale * (W @ activation_kernel(centers, widths, np.exp(-alpha_s * (t + 0.5 * dt) / tau)))
        f4 = scale * (W @ activation_kernel(centers, widths, np.exp(-alpha_s * (t + dt) / tau)))
        kx1 = z / tau
        kz1 = (alpha_z * (beta_z * (x_g - x) - z) + f1) / tau
        x2 = x + 0.5 * dt * kx1
        z2 = z + 0.5 * dt * kz1
        kx2 = z2 / tau
        kz2 = (alpha_z * (beta_z * (x_g - x2) - z2) + fm) / tau
        x3 = x + 0.5 * dt * kx2
        z3 = z + 0.5 * dt * kz2
        kx3 = z3 / tau
        kz3 = (alpha_z * (beta_z * (x_g - x3) - z3) + fm) / tau
        x4 = x + dt * kx3
        z4 = z + dt * kz3
        kx4 = z4 / tau
        kz4 = (alpha_z * (beta_z * (x_g - x4) - z4) + f4) / tau
        x = x + dt / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4)
        z = z + dt / 6.0 * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            status = k
            break
        xs[k + 1] = x
        zs[k + 1] = z
    return xs, zs / tau, status


# ---------------------------------------------------------------------------
# public API

def canonical_eval(model, t):
    """Phase variable ``s(t) = exp(-alpha_s t / tau)``."""
    return np.exp(-model.alpha_s * np.asarray(t, dtype=float) / model.tau)


def activations(model, s):
    """Rows ``a(s)`` for one phase value or an array of them, shape ``(..., N)``."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    e = -model.widths * (s_arr[:, None] - model.centers) ** 2
    m = e.max(axis=1, keepdims=True)
    phi = np.exp(e - m)
    total = phi.sum(axis=1, keepdims=True)
    if np.any(m[:, 0] + np.log(total[:, 0]) < LOG_TINY):
        raise DmpError("basis activations underflow: phase outside basis support")
    a = phi * (s_arr[:, None] / total)
    return a[0] if np.ndim(s) == 0 else a


def forcing_eval(model, s):
    """Forcing term ``W a(s)``."""
    return activations(model, s) @ model.weights.T


def dmp_rollout(model, x_i=None, x_g=None, dt=1e-3, T=None):
    """Integrate the transformation system from ``x_i`` towards ``x_g``.

    Classical RK4 with a fixed step. ``T`` defaults to ``tau``; the returned
    rollout has ``round(T / dt) + 1`` samples.
    """
    x_i = model.x_i if x_i is None else x_i
    x_g = model.x_g if x_g is None else x_g
    if x_i is None or x_g is None:
        raise DmpError("rollout needs start and goal positions")
    x_i = np.ascontiguousarray(np.atleast_1d(x_i), dtype=float)
    x_g = np.ascontiguousarray(np.atleast_1d(x_g), dtype=float)
    if x_i.shape != (model.n,) or x_g.shape != (model.n,):
        raise DmpError(f"start/goal must have {model.n} components")
    T = model.tau if T is None else T
    if not (dt > 0 and T > 0):
        raise DmpError("dt and T must be positive")
    nsteps = int(round(T / dt))
    xs, xds, status = rollout_kernel(model.centers, model.widths,
                                     np.ascontiguousarray(model.weights), model.alpha_s,
                                     model.alpha_z, model.beta_z, model.tau, x_i, x_g, dt, nsteps)
    if status >= 0:
        raise DivergenceError(f"rollout state became non-finite at step {status}")
    return DmpRollout(dt, xs, xds)


def gaussian_smooth(signal, rate, window):
    """Gaussian-weighted moving average over a time window.

    The kernel spans ``window`` seconds with standard deviation ``window / 5``.
    Near the ends it is truncated and the remaining weights renormalised.
    """
    signal = np.asarray(signal, dtype=float)
    half = int(np.floor(0.5 * window * rate))
    if half < 1:
        return signal.copy()
    sigma = window / 5.0
    k = np.arange(-half, half + 1) / rate
    w = np.exp(-0.5 * (k / sigma) ** 2)
    L = signal.shape[0]

    def centred(c):
        # "same" alignment that also holds when the kernel outgrows the signal
        return np.convolve(c, w, mode="full")[half:half + L]

    norm = centred(np.ones(L))
    cols = signal.reshape(L, -1)
    out = np.column_stack([centred(c) for c in cols.T]) / norm[:, None]
    return out.reshape(signal.shape)


def preprocess_demo(samples, rate, window=0.165, dim_names=None):
    """Finite-difference velocities/accelerations and smooth all three signals."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 3:
        raise DmpError(f"need >= 3 samples, got {x.shape[0]}")
    if not rate > 0:
        raise DmpError("sampling rate must be positive")
    # forward difference for velocity, backward for acceleration
    xd = np.empty_like(x)
    xd[:-1] = np.diff(x, axis=0) * rate
    xd[-1] = xd[-2]
    xdd = np.empty_like(x)
    xdd[1:] = np.diff(xd, axis=0) * rate
    xdd[0] = xdd[1]
    t = np.arange(x.shape[0]) / rate
    return DemonstrationSet(t, gaussian_smooth(x, rate, window), gaussian_smooth(xd, rate, window),
                            gaussian_smooth(xdd, rate, window),
                            tuple(dim_names) if dim_names is not None else None)


def regression_targets(model, demo):
    """Basis matrix ``A`` (N x P) and scaled targets ``B`` (n x P)."""
    x_i, x_g = demo.x[0], demo.x[-1]
    span = x_g - x_i
    for d in range(span.shape[0]):
        if abs(span[d]) <= 1e-9:
            names = demo.dim_names or model.dim_names
            raise DegenerateDimensionError(d, names[d] if names else None)
    s = canonical_eval(model, demo.t - demo.t[0])
    A = activations(model, s).T
    tau, az, bz = model.tau, model.alpha_z, model.beta_z
    b = tau ** 2 * demo.xdd + az * tau * demo.xd + az * bz * (demo.x - x_g)
    B = (b / span).T
    return A, B


def residual(W, A, B):
    """Frobenius norm of ``W A - B``, accumulated in extended precision."""
    E = np.asarray(W, dtype=np.longdouble) @ np.asarray(A, dtype=np.longdouble) - np.asarray(B, dtype=np.longdouble)
    return float(np.sqrt(np.sum(E * E)))


def imitation_llsq(demo, model, refine=2):
    """Least-squares forcing weights ``W* = B A^T (A A^T)^-1`` for a demonstration.

    A small ridge ``1e-8 trace(A A^T) / N`` keeps the normal equations
    solvable; ``refine`` rounds of iterative refinement then remove its bias,
    so the result is the unregularised minimiser whenever ``A A^T`` is
    nonsingular. Returns a model carrying the weights and the demonstration
    endpoints.
    """
    A, B = regression_targets(model, demo)
    G = A @ A.T
    N = G.shape[0]
    lam = 1e-8 * np.trace(G) / N
    Gr = G + lam * np.eye(N)
    try:
        factor = cho_factor(Gr)
    except np.linalg.LinAlgError:
        raise DmpError("A A^T is rank deficient beyond ridge rescue") from None

    def solve(rhs):
        return cho_solve(factor, rhs)

    Wt = solve(A @ B.T)
    for _ in range(refine):
        Wt = Wt + solve(A @ B.T - G @ Wt)
    if not np.all(np.isfinite(Wt)):
        raise DmpError("least-squares solution is not finite")
    names = demo.dim_names or model.dim_names
    return replace(model, weights=Wt.T, x_i=demo.x[0].copy(), x_g=demo.x[-1].copy(),
                   dim_names=names)


def rollout_rmse(rollout, t, x):
    """RMS Euclidean distance between a rollout and samples ``x`` at times ``t``."""
    xr, _ = rollout.evaluate(np.asarray(t, dtype=float))
    K = np.size(t)
    err = np.reshape(xr, (K, -1)) - np.reshape(x, (K, -1))
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


# ---------------------------------------------------------------------------
# demonstration files

def read_demo_csv(path):
    """Read ``t,x,y`` style CSV; returns ``(t, positions, column_names)``."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        if len(cols) < 2 or cols[0] != "t":
            raise DmpError(f"{path}: header must start with 't', got '{header}'")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DmpError(f"{path}: {exc}") from None
    if data.size == 0:
        data = np.zeros((0, len(cols)))
    if data.shape[1] != len(cols):
        raise DmpError(f"{path}: expected {len(cols)} columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1:], tuple(cols[1:])


def sample_rate(t):
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DmpError("demonstration times must be strictly increasing")
    if np.ptp(dt) > 1e-6 * dt.mean() + 1e-12:
        raise DmpError("demonstration must be uniformly sampled")
    return 1.0 / dt.mean()


def write_demo_csv(path, t, x, names=("x", "y")):
    data = np.column_stack([t, x])
    np.savetxt(path, data, delimiter=",", header=",".join(("t",) + tuple(names)), comments="",
               fmt="%.10g")


def synthetic_letter(rate=333.0, P=2331, seed=None):
    """Smooth planar pen path used as the bundled demonstration.

    A cursive loop-and-stroke shape with a minimum-jerk time law, so the
    pen starts and ends at rest. ``seed`` adds a small random stretch for
    generating varied demonstrations reproducibly.
    """
    t = np.arange(P) / rate
    u = t / t[-1]
    u = u ** 3 * (10 - 15 * u + 6 * u ** 2)
    sx, sy = 1.0, 1.0
    if seed is not None:
        rng = np.random.default_rng(seed)
        sx, sy = 1.0 + 0.1 * rng.uniform(-1, 1, size=2)
    x = sx * (0.20 * u - 0.035 * np.sin(4 * np.pi * u))
    y = sy * (0.06 * u + 0.05 * np.sin(2 * np.pi * u) * (1 - 0.5 * u) + 0.02 * (1 - np.cos(4 * np.pi * u)))
    return t, np.column_stack([x, y])
