"""Kinematic primitives: submovements, oscillations and their superposition.

Every term maps time to a position and a velocity. A virtual trajectory is
the plain sum of its terms, so adding a term never alters the others.
All ``evaluate`` methods accept a scalar time or an array of times; for an
array of shape ``(K,)`` they return arrays of shape ``(K, dim)``.
"""
from dataclasses import dataclass, field

import numpy as np

PLANES = {"XY": (0, 1), "YZ": (1, 2), "XZ": (0, 2)}


def minjerk_basis(t, t0, T):
    """Minimum-jerk transition ``f`` from 0 to 1 over ``[t0, t0 + T]`` and its rate.

    >>> minjerk_basis(1.0, 0.0, 2.0)
    (0.5, 0.9375)
    """
    if not T > 0:
        raise ValueError(f"duration must be positive, got {T}")
    t = np.asarray(t, dtype=float)
    u = np.clip((t - t0) / T, 0.0, 1.0)
    # decide completion on t itself: (t - t0) / T can round just below 1
    done = t >= t0 + T
    f = np.where(done, 1.0, np.minimum(u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2), 1.0))
    fdot = np.where(done, 0.0, 30.0 * u ** 2 * (1.0 - u) ** 2 / T)
    if f.ndim == 0:
        return float(f), float(fdot)
    return f, fdot


BASES = {"minjerk": minjerk_basis}


def _as_vec(v, dim=3):
    v = np.array(v, dtype=float)
    if v.shape != (dim,) or not np.all(np.isfinite(v)):
        raise ValueError(f"expected a finite {dim}-vector, got {v!r}")
    v.setflags(write=False)
    return v


def _scalar_or_rows(t, x, xd):
    if np.ndim(t) == 0:
        return x[0], xd[0]
    return x, xd


@dataclass(frozen=True)
class Constant:
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _as_vec(self.value, np.size(self.value)))

    @property
    def dim(self):
        return self.value.shape[0]

    def evaluate(self, t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.broadcast_to(self.value, (tt.size, self.dim)).copy()
        return _scalar_or_rows(t, x, np.zeros_like(x))


@dataclass(frozen=True)
class Submovement:
    """Goal-directed discrete movement with finite support.

    Before ``t_start`` the term sits at ``base``; after ``t_start + duration``
    it sits at ``base + displacement``. Follow-up movements superimposed on an
    earlier one use ``base = 0``.
    """
    t_start: float
    duration: float
    displacement: np.ndarray
    base: np.ndarray = None
    basis: str = "minjerk"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"submovement duration must be positive, got {self.duration}")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis '{self.basis}'")
        disp = _as_vec(self.displacement, np.size(self.displacement))
        object.__setattr__(self, "displacement", disp)
        base = np.zeros_like(disp) if self.base is None else self.base
        object.__setattr__(self, "base", _as_vec(base, disp.shape[0]))

    @classmethod
    def between(cls, start, goal, t_start, duration, basis="minjerk"):
        start = np.asarray(start, dtype=float)
        return cls(t_start, duration, np.asarray(goal, dtype=float) - start, start, basis)

    @property
    def dim(self):
        return self.displacement.shape[0]

    @property
    def t_end(self):
        return self.t_start + self.duration

    def evaluate(self, t):
        f, fdot = BASES[self.basis](np.atleast_1d(np.asarray(t, dtype=float)), self.t_start,
                                    self.duration)
        x = self.base + np.outer(f, self.displacement)
        xd = np.outer(fdot, self.displacement)
        return _scalar_or_rows(t, x, xd)


@dataclass(frozen=True)
class Oscillation:
    """Circular oscillation in a coordinate plane.

    ``center_offset`` defaults to ``-radius`` along the plane's first axis, so
    with zero phase the term starts at the origin and switching it on causes
    no jump.
    """
    radius: float
    angular_velocity: float
    phase: float = 0.0
    plane: str = "YZ"
    center_offset: np.ndarray = None

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("oscillation radius must be >= 0")
        if self.plane not in PLANES:
            raise ValueError(f"plane must be one of {sorted(PLANES)}, got '{self.plane}'")
        if self.center_offset is None:
            c = np.zeros(3)
            c[PLANES[self.plane][0]] = -self.radius
        else:
            c = self.center_offset
        object.__setattr__(self, "center_offset", _as_vec(c))

    dim = 3

    @property
    def period(self):
        return 2.0 * np.pi / abs(self.angular_velocity)

    def evaluate(self, t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = PLANES[self.plane]
        arg = self.angular_velocity * tt + self.phase
        x = np.broadcast_to(self.center_offset, (tt.size, 3)).copy()
        xd = np.zeros((tt.size, 3))
        x[:, a] += self.radius * np.cos(arg)
        x[:, b] += self.radius * np.sin(arg)
        xd[:, a] = -self.radius * self.angular_velocity * np.sin(arg)
        xd[:, b] = self.radius * self.angular_velocity * np.cos(arg)
        return _scalar_or_rows(t, x, xd)


@dataclass(frozen=True)
class SampledTrajectory:
    """Uniformly sampled path with C1 cubic-Hermite interpolation.

    Sample ``k`` lies at time ``k * dt``. Outside ``[0, duration]`` the path
    holds its end values with zero velocity.
    """
    dt: float
    x: np.ndarray
    xd: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        xd = np.array(self.xd, dtype=float)
        if x.ndim == 1:
            x, xd = x[:, None], xd[:, None]
        if not self.dt > 0 or x.shape != xd.shape or x.shape[0] < 2:
            raise ValueError("need dt > 0 and at least two matching position/velocity samples")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xd))):
            raise ValueError("sampled trajectory contains non-finite values")
        x.setflags(write=False)
        xd.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xd", xd)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def duration(self):
        return (self.x.shape[0] - 1) * self.dt

    @property
    def times(self):
        return np.arange(self.x.shape[0]) * self.dt

    def evaluate(self, t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        K = self.x.shape[0]
        pos = tt / self.dt
        k = np.clip(np.floor(pos).astype(int), 0, K - 2)
        s = np.clip(pos - k, 0.0, 1.0)[:, None]
        x0, x1 = self.x[k], self.x[k + 1]
        m0, m1 = self.xd[k] * self.dt, self.xd[k + 1] * self.dt
        s2, s3 = s * s, s * s * s
        x = (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * m1
        xd = ((6 * s2 - 6 * s) * x0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * x1
              + (3 * s2 - 2 * s) * m1) / self.dt
        # exact samples at the knots, hold outside the support
        on_knot = (pos == np.floor(pos)) & (pos >= 0) & (pos <= K - 1)
        if np.any(on_knot):
            idx = pos[on_knot].astype(int)
            x[on_knot] = self.x[idx]
            xd[on_knot] = self.xd[idx]
        before, after = tt < 0.0, tt > self.duration
        x[before], xd[before] = self.x[0], 0.0
        x[after], xd[after] = self.x[-1], 0.0
        return _scalar_or_rows(t, x, xd)


@dataclass(frozen=True)
class TimeReversed:
    """``term(T - t)`` on ``[0, T)``, then ``term(0)`` held."""
    term: object
    T: float

    @property
    def dim(self):
        return self.term.dim

    @property
    def duration(self):
        return self.T

    def evaluate(self, t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        active = tt < self.T
        x, xd = self.term.evaluate(np.where(active, self.T - tt, 0.0))
        x = np.array(x, dtype=float).reshape(tt.size, -1)
        xd = -np.array(xd, dtype=float).reshape(tt.size, -1)
        hold, _ = self.term.evaluate(np.zeros(1))
        x[~active] = hold[0]
        xd[~active] = 0.0
        return _scalar_or_rows(t, x, xd)


def time_reverse(term, T):
    duration = getattr(term, "duration", None)
    if duration is None or not np.isclose(duration, T, rtol=0.0, atol=1e-9):
        raise ValueError(f"reversal time {T} does not match the term duration {duration}")
    return TimeReversed(term, float(duration))


@dataclass(frozen=True)
class Embedded:
    """Place a low-dimensional term into chosen coordinates of a 3-vector."""
    term: object
    axes: tuple = (0, 1)

    def __post_init__(self):
        if len(self.axes) != self.term.dim:
            raise ValueError(f"{len(self.axes)} axes for a {self.term.dim}-dimensional term")
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))

    dim = 3

    @property
    def duration(self):
        return self.term.duration

    def evaluate(self, t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        xs, xds = self.term.evaluate(tt)
        x = np.zeros((tt.size, 3))
        xd = np.zeros((tt.size, 3))
        x[:, self.axes] = np.reshape(xs, (tt.size, -1))
        xd[:, self.axes] = np.reshape(xds, (tt.size, -1))
        return _scalar_or_rows(t, x, xd)


@dataclass(frozen=True)
class VirtualTrajectory:
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        dims = {t.dim for t in self.terms}
        if len(dims) > 1:
            raise ValueError(f"terms have mixed dimensions {sorted(dims)}")

    def add(self, term):
        return VirtualTrajectory(self.terms + (term,))

    def __add__(self, other):
        return VirtualTrajectory(self.terms + tuple(other.terms))

    def evaluate(self, t):
        return compose_eval(self, t)


def compose_eval(vt, t):
    """Sum of the term evaluations at ``t``."""
    if not vt.terms:
        raise ValueError("virtual trajectory has no terms")
    x, xd = vt.terms[0].evaluate(t)
    x, xd = np.array(x, dtype=float), np.array(xd, dtype=float)
    for term in vt.terms[1:]:
        xi, xdi = term.evaluate(t)
        x += xi
        xd += xdi
    return x, xd


def submovement_eval(s, t):
    return s.evaluate(t)


def oscillation_eval(o, t):
    return o.evaluate(t)
