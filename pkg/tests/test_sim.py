import numpy as np
import pytest

from edakit.impedance import ControlTarget, ImpedanceGains, energy
from edakit.primitives import Constant, Submovement, VirtualTrajectory
from edakit.robotmodel import (JointState, bias_forces, forward_kinematics, jacobians,
                               kinetic_energy, mass_matrix)
from edakit.sim import (ContactPlane, SimConfig, SimulationDivergence, Trace, contact_force,
                        drawn_points, erased_mask, joint_acceleration, run_closed_loop, sim_step,
                        simulate_open_loop)


def hold(model, q, cfg, gains=None, qdot=None, plane=None):
    pose = forward_kinematics(model, q)
    gains = gains or ImpedanceGains.create(model.n)
    return run_closed_loop(model, gains, VirtualTrajectory([Constant(pose.p)]), pose.R, plane, cfg,
                           q, qdot)


def largest_rise(V, window):
    """Largest ``V[j] - V[i]`` with ``i <= j < i + window``."""
    padded = np.pad(V, (0, window - 1), mode="edge")
    ahead = np.lib.stride_tricks.sliding_window_view(padded, window).max(axis=1)
    return (ahead - V).max()


def test_contact_examples():
    plane = ContactPlane(0.1)
    assert np.array_equal(contact_force(plane, [0, 0, 0.2], [1, 1, -1]), np.zeros(3))
    assert np.allclose(contact_force(plane, [0, 0, 0.099], np.zeros(3)), [0, 0, 10])
    f = contact_force(plane, [0, 0, 0.099], [0.1, -0.2, 0.0])
    assert np.allclose(f, [-1, 2, 10])
    assert contact_force(plane, [0, 0, 0.099], [0, 0, 5.0])[2] == 0.0
    with pytest.raises(ValueError):
        ContactPlane(0.0, stiffness=-1.0)


def test_equilibrium_step_is_exact(iiwa, rng):
    q = rng.uniform(-2, 2, 7)
    nxt = sim_step(iiwa, JointState(q, np.zeros(7)), np.zeros(7))
    assert np.array_equal(nxt.q, q) and np.array_equal(nxt.qdot, np.zeros(7))


def test_constant_torque_parabola(single):
    I = mass_matrix(single, [0.0])[0, 0]
    assert I == 0.5
    tau, dt = np.array([1.0]), 1e-3
    exact = simulate_open_loop(single, JointState(np.zeros(1), np.zeros(1)), tau, 1.0, dt, "rk4")
    assert abs(exact.q[0] - 1.0 / (2 * I)) < 1e-12
    # semi-implicit Euler carries an exact first-order bias a * dt * t / 2
    euler = simulate_open_loop(single, JointState(np.zeros(1), np.zeros(1)), tau, 1.0, dt)
    a = tau[0] / I
    assert np.isclose(euler.q[0] - a / 2, a * dt / 2, rtol=1e-9)


def test_convergence_order(planar):
    rng = np.random.default_rng(4)
    s0 = JointState(np.array([0.3, -0.8]), np.array([0.5, -0.2]))
    tau = rng.normal(size=2)

    def final(dt, integ):
        return simulate_open_loop(planar, s0, tau, 0.4, dt, integ).q

    ref = final(1e-4, "rk4")
    e1, e2 = (np.linalg.norm(final(dt, "semi-implicit-euler") - ref) for dt in (4e-3, 2e-3))
    assert 1.7 < e1 / e2 < 2.3
    e1, e2 = (np.linalg.norm(final(dt, "rk4") - ref) for dt in (4e-2, 2e-2))
    assert 12 < e1 / e2 < 20


def test_acceleration_solves_dynamics(iiwa, rng):
    plane = ContactPlane(0.5)
    for _ in range(20):
        q, qd, tau = rng.uniform(-2, 2, 7), rng.normal(size=7), rng.normal(size=7) * 10
        qdd, fn = joint_acceleration(iiwa, JointState(q, qd), tau, plane)
        pose = forward_kinematics(iiwa, q)
        Jp, _ = jacobians(iiwa, q)
        f = contact_force(plane, pose.p, Jp @ qd)
        assert fn == f[2]
        rhs = tau + Jp.T @ f - bias_forces(iiwa, q, qd)
        assert np.abs(mass_matrix(iiwa, q) @ qdd - rhs).max() < 1e-9


def test_energy_balance_open_loop(iiwa, rng):
    q, qd, tau = rng.uniform(-2, 2, 7), rng.normal(size=7) * 0.3, rng.normal(size=7)
    state, work, dt = JointState(q, qd), 0.0, 1e-3
    ke0 = kinetic_energy(iiwa, q, qd)
    for _ in range(500):
        nxt = sim_step(iiwa, state, tau, dt=dt, integrator="rk4")
        work += 0.5 * dt * tau @ (state.qdot + nxt.qdot)
        state = nxt
    assert abs(kinetic_energy(iiwa, state.q, state.qdot) - ke0 - work) < 1e-5


def test_start_at_equilibrium_stays(iiwa, rng):
    tr = hold(iiwa, rng.uniform(-1.5, 1.5, 7), SimConfig(2.0))
    assert np.abs(tr.qdot).max() < 1e-9


def test_records_every_third_step(planar):
    tr = hold(planar, np.array([0.4, 0.9]), SimConfig(0.3, 1e-3, 3))
    assert len(tr.t) == 101 and np.allclose(np.diff(tr.t), 3e-3)


def test_runs_are_deterministic(iiwa):
    q = np.array([0.1, 0.5, 0.0, -1.2, 0.3, 0.6, 0.0])
    pose = forward_kinematics(iiwa, q)
    vt = VirtualTrajectory([Submovement.between(pose.p, pose.p + [0.05, 0.05, -0.05], 0.1, 0.5)])
    args = (iiwa, ImpedanceGains.create(7), vt, pose.R, ContactPlane(pose.p[2] - 0.03),
            SimConfig(1.0), q)
    a, b = run_closed_loop(*args), run_closed_loop(*args)
    for key in Trace.__dataclass_fields__:
        assert np.array_equal(getattr(a, key), getattr(b, key))
    assert a.fn.min() >= 0 and a.fn.max() > 0


@pytest.mark.parametrize("name", ["planar2r", "iiwa14"])
def test_regulation_converges(name, rng, request):
    model = request.getfixturevalue("planar" if name == "planar2r" else "iiwa")
    q_goal = rng.uniform(-1.2, 1.2, model.n)
    if name == "planar2r":
        q_goal[1] = 1.0  # keep away from the stretched-out singularity
    goal = forward_kinematics(model, q_goal)
    q0 = q_goal + rng.normal(size=model.n) * 0.2
    tr = run_closed_loop(model, ImpedanceGains.create(model.n), VirtualTrajectory([Constant(goal.p)]),
                         goal.R, None, SimConfig(10.0), q0)
    assert np.linalg.norm(tr.p[-1] - goal.p) < 1e-4
    assert np.linalg.norm(tr.qdot[-1]) < 1e-4


def test_energy_never_rises(iiwa):
    rng = np.random.default_rng(21)
    g = ImpedanceGains.create(7)
    for _ in range(3):
        q_goal = rng.uniform(-1.5, 1.5, 7)
        goal = forward_kinematics(iiwa, q_goal)
        tr = run_closed_loop(iiwa, g, VirtualTrajectory([Constant(goal.p)]), goal.R, None,
                             SimConfig(2.0, record_every=1), q_goal + rng.normal(size=7) * 0.3,
                             rng.normal(size=7) * 0.5)
        target = ControlTarget(goal.p, np.zeros(3), goal.R)
        V = np.array([energy(iiwa, q, qd, target, g) for q, qd in zip(tr.q, tr.qdot)])
        assert largest_rise(V, 1000) <= 1e-4


def test_divergence_reports_step(planar):
    with pytest.raises(SimulationDivergence) as err:
        hold(planar, np.array([0.3, 1.0]), SimConfig(100.0, dt=0.5),
             ImpedanceGains.create(2, kp=1e9, bp=1e9), qdot=np.array([10.0, -10.0]))
    assert err.value.step >= 0


def test_input_validation(planar):
    with pytest.raises(ValueError):
        SimConfig(0.0)
    with pytest.raises(ValueError):
        SimConfig(1.0, integrator="euler")
    with pytest.raises(ValueError):
        sim_step(planar, JointState(np.zeros(2), np.zeros(2)), np.zeros(2), dt=0.0)
    with pytest.raises(ValueError, match="tau"):
        sim_step(planar, JointState(np.zeros(2), np.zeros(2)), np.zeros(3))


def test_trace_csv_round_trip(iiwa, tmp_path):
    tr = hold(iiwa, np.array([0.1, 0.5, 0.0, -1.2, 0.3, 0.6, 0.0]), SimConfig(0.1))
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:2] == ["t", "q1"] and header[-1] == "fn" and "logRz" in header
    assert len(header) == 1 + 7 + 7 + 9 + 7 + 1
    back = Trace.from_csv(path)
    for key in ("t", "q", "qdot", "p", "logR", "x0", "tau", "fn"):
        assert np.array_equal(getattr(back, key), getattr(tr, key))


def test_trace_concat_and_shift(planar):
    tr = hold(planar, np.array([0.4, 0.9]), SimConfig(0.03))
    joined = tr.concat(tr.shifted(tr.t[-1] + 0.003))
    assert len(joined.t) == 2 * len(tr.t) and np.all(np.diff(joined.t) > 0)
    assert np.array_equal(tr.select(slice(2, 4)).q, tr.q[2:4])


def test_ink_bookkeeping():
    fn = np.array([0.0, 0.6, 2.0, 0.4])
    p = np.array([[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0], [0.3, 0, 0]], dtype=float)
    tr = Trace(np.arange(4.0), np.zeros((4, 1)), np.zeros((4, 1)), p, np.zeros((4, 3)),
               np.zeros((4, 3)), np.zeros((4, 3)), np.zeros((4, 1)), fn)
    ink = drawn_points(tr)
    assert np.array_equal(ink, [[0.1, 0], [0.2, 0]])
    assert np.array_equal(erased_mask(ink, [[0.1, 0.02]], 0.03), [True, False])
    assert erased_mask(ink, np.zeros((0, 2)), 0.03).sum() == 0
    assert erased_mask(np.zeros((0, 2)), [[0, 0]], 0.03).size == 0
