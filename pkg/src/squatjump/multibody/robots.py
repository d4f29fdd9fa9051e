"""Built-in robot models and standing/squat configuration helpers."""

import math

import numpy as np
from scipy.optimize import brentq

from .dynamics import TreeKinematics
from .model import ContactPoint, Frame, Joint, Link, RobotModel, RobotState
from .spatial import rotation_about

Y = np.array([0.0, 1.0, 0.0])


def _box_inertia(m, a, b, c):
    return np.diag([m * (b * b + c * c) / 12.0, m * (a * a + c * c) / 12.0, m * (a * a + b * b) / 12.0])


def icub_sagittal(velocity_limit=10.0, torque_limit=150.0):
    """Sagittal-plane humanoid of roughly iCub size (about 1 m, 30 kg).

    Both legs are lumped into one chain (hip, knee, ankle pitch); the two
    feet frames sit at +/-7 cm laterally on the shared foot link. The base
    link is the torso, with its frame at the hip axis.
    """
    links = [
        Link("torso", 9.0, np.array([0.0, 0.0, 0.08]), _box_inertia(9.0, 0.12, 0.20, 0.16)),
        Link("upper_body", 14.0, np.array([0.0, 0.0, 0.15]), _box_inertia(14.0, 0.15, 0.25, 0.30)),
        Link("thigh", 3.5, np.array([0.0, 0.0, -0.11]), _box_inertia(3.5, 0.08, 0.16, 0.25)),
        Link("shank", 2.5, np.array([0.0, 0.0, -0.11]), _box_inertia(2.5, 0.07, 0.14, 0.25)),
        Link("foot", 0.8, np.array([0.03, 0.0, -0.045]), _box_inertia(0.8, 0.12, 0.20, 0.03)),
    ]
    vel = (-velocity_limit, velocity_limit)
    tau = (-torque_limit, torque_limit)
    joints = [
        Joint("upper_body_fixed", "torso", "upper_body", Y, np.array([0.0, 0.0, 0.15]), np.zeros(3), type="fixed"),
        Joint("hip_pitch", "torso", "thigh", -Y, np.zeros(3), np.zeros(3),
              position_limits=(-0.5, 2.0), velocity_limits=vel, torque_limits=tau),
        Joint("knee", "thigh", "shank", Y, np.array([0.0, 0.0, -0.25]), np.zeros(3),
              position_limits=(0.0, 2.4), velocity_limits=vel, torque_limits=tau),
        Joint("ankle_pitch", "shank", "foot", -Y, np.array([0.0, 0.0, -0.25]), np.zeros(3),
              position_limits=(-0.8, 1.2), velocity_limits=vel, torque_limits=tau),
    ]
    frames = [
        Frame("base", "torso", np.zeros(3)),
        Frame("left_foot", "foot", np.array([0.03, 0.07, -0.06])),
        Frame("right_foot", "foot", np.array([0.03, -0.07, -0.06])),
    ]
    contacts = []
    for side in ("left_foot", "right_foot"):
        contacts.append(ContactPoint(f"{side}_heel", side, np.array([-0.06, 0.0, 0.0])))
        contacts.append(ContactPoint(f"{side}_toe", side, np.array([0.06, 0.0, 0.0])))
    return RobotModel(links, joints, "torso", frames, contacts, name="icub-sagittal",
                      sole_half_length=0.06, sole_half_width=0.03)


def place_on_ground(model, s, torso_pitch=0.0, foot_frame="left_foot", ground=0.0, sink=0.0, x=0.0):
    """State with the given joint angles and the feet sole at ground height.

    The base is pitched by ``torso_pitch`` about the world y axis; the foot
    frame origin ends up at ``(x, +/-, ground - sink)``.
    """
    R = rotation_about(Y, torso_pitch)
    st = RobotState.from_rotation(np.zeros(3), R, s)
    p_foot, _ = TreeKinematics(model, st).frame_pose(foot_frame)
    st.base_position = np.array([x - p_foot[0], 0.0, ground - sink - p_foot[2]])
    return st


def squat_configuration(model, knee, torso_pitch=0.0, ground=0.0, sink=0.0):
    """Flat-footed pose with the CoM above the middle of the sole.

    Solves for the hip angle; the ankle keeps the foot level.
    """

    def pose(hip):
        ankle = torso_pitch - hip + knee
        return place_on_ground(model, np.array([hip, knee, ankle]), torso_pitch, ground=ground, sink=sink)

    def com_offset(hip):
        kin = TreeKinematics(model, pose(hip))
        return kin.com_position()[0] - kin.frame_pose("left_foot")[0][0]

    hip = brentq(com_offset, -0.4, 1.9, xtol=1e-14)
    return pose(hip)


def default_squat(model, ground=0.0, sink=0.0):
    return squat_configuration(model, knee=math.radians(100.0), torso_pitch=math.radians(10.0),
                               ground=ground, sink=sink)
