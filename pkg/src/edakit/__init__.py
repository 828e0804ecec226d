"""Elementary dynamic actions for torque-controlled arms.

Submovements, oscillations and movement primitives build a virtual
trajectory; mechanical impedances attach the simulated robot to it.
"""
from .dmp import (DemonstrationSet, DmpModel, DmpRollout, dmp_rollout, imitation_llsq,
                  preprocess_demo)
from .impedance import ControlTarget, ImpedanceGains, assemble_torque, energy
from .primitives import (Constant, Embedded, Oscillation, SampledTrajectory, Submovement,
                         TimeReversed, VirtualTrajectory, minjerk_basis, time_reverse)
from .robotmodel import (JointState, Pose, RobotDescription, bias_forces, forward_kinematics,
                         jacobians, load_robot, load_robot_file, mass_matrix, shipped_robot)
from .sim import ContactPlane, SimConfig, Trace, contact_force, run_closed_loop, sim_step
from .spatialmath import skew, so3_exp, so3_log

__version__ = "0.1.0"
