"""Robot description (links, joints, frames, contact points) and state."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spatial import matrix_to_quat, quat_to_matrix, skew


class ModelError(ValueError):
    """Invalid robot description."""


class StateMismatchError(ValueError):
    """State dimensions do not match the model."""


class UnknownFrameError(KeyError):
    pass


def rpy_matrix(rpy):
    """Fixed-axis roll/pitch/yaw, R = Rz(yaw) Ry(pitch) Rx(roll)."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass
class Link:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # about the link CoM, link axes


@dataclass
class Joint:
    name: str
    parent: str
    child: str
    axis: np.ndarray
    origin_xyz: np.ndarray
    origin_rpy: np.ndarray
    type: str = "revolute"
    position_limits: tuple = (-math.pi, math.pi)
    velocity_limits: tuple = (-10.0, 10.0)
    torque_limits: tuple = (-100.0, 100.0)

    @property
    def origin_rotation(self):
        return rpy_matrix(self.origin_rpy)


@dataclass
class Frame:
    name: str
    link: str
    xyz: np.ndarray
    rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class ContactPoint:
    name: str
    frame: str
    xyz: np.ndarray  # in the owning frame


class RobotModel:
    """Kinematic tree with a floating base and revolute (or fixed) joints.

    The generalized velocity is ``nu = (base linear velocity, base angular
    velocity, joint velocities)``, both base parts in the inertial frame.
    """

    def __init__(self, links, joints, base, frames=(), contact_points=(), name="robot",
                 sole_half_length=0.06, sole_half_width=0.03):
        self.name = name
        self.links = list(links)
        self.joints = list(joints)
        self.base = base
        self.frames = list(frames)
        self.contact_points = list(contact_points)
        self.sole_half_length = float(sole_half_length)
        self.sole_half_width = float(sole_half_width)
        self._validate()
        self._compile()

    # -- structure -------------------------------------------------------
    def _validate(self):
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise ModelError("duplicate link names")
        if self.base not in names:
            raise ModelError(f"base link {self.base!r} not among links")
        for l in self.links:
            if not (l.mass > 0.0):
                raise ModelError(f"link {l.name!r}: mass must be positive")
            I = np.asarray(l.inertia, dtype=float)
            if I.shape != (3, 3) or not np.allclose(I, I.T, atol=1e-12):
                raise ModelError(f"link {l.name!r}: inertia must be symmetric 3x3")
            if np.linalg.eigvalsh(I).min() <= 0.0:
                raise ModelError(f"link {l.name!r}: inertia must be positive definite")
        children = {}
        for j in self.joints:
            if j.type not in ("revolute", "fixed"):
                raise ModelError(f"joint {j.name!r}: unsupported type {j.type!r}")
            if j.parent not in names or j.child not in names:
                raise ModelError(f"joint {j.name!r}: unknown parent/child link")
            if j.child == self.base:
                raise ModelError("base link cannot be a joint child")
            if j.child in children:
                raise ModelError(f"link {j.child!r} has more than one parent")
            children[j.child] = j
            if j.type == "revolute":
                if abs(np.linalg.norm(j.axis) - 1.0) > 1e-9:
                    raise ModelError(f"joint {j.name!r}: axis must be unit norm")
                lo, hi = j.position_limits
                if not lo < hi:
                    raise ModelError(f"joint {j.name!r}: position limits out of order")
                vlo, vhi = j.velocity_limits
                tlo, thi = j.torque_limits
                if not (vlo < 0.0 < vhi and tlo < 0.0 < thi):
                    raise ModelError(f"joint {j.name!r}: velocity/torque limits must bracket zero")
        if len(children) != len(self.links) - 1:
            raise ModelError("every non-base link needs exactly one parent joint")
        # reachability from the base rules out cycles
        seen, stack = {self.base}, [self.base]
        while stack:
            cur = stack.pop()
            for j in self.joints:
                if j.parent == cur and j.child not in seen:
                    seen.add(j.child)
                    stack.append(j.child)
        if len(seen) != len(self.links):
            raise ModelError("kinematic structure is not a tree rooted at the base")
        link_names = set(names)
        frame_names = [f.name for f in self.frames]
        if len(set(frame_names)) != len(frame_names):
            raise ModelError("duplicate frame names")
        for f in self.frames:
            if f.link not in link_names:
                raise ModelError(f"frame {f.name!r}: unknown link {f.link!r}")
        for c in self.contact_points:
            if c.frame not in frame_names:
                raise ModelError(f"contact point {c.name!r}: unknown frame {c.frame!r}")

    def _compile(self):
        by_name = {l.name: l for l in self.links}
        parent_joint = {j.child: j for j in self.joints}
        order = [self.base]
        i = 0
        while i < len(order):
            for j in self.joints:
                if j.parent == order[i]:
                    order.append(j.child)
            i += 1
        self.body_names = order
        self.body_index = {n: k for k, n in enumerate(order)}
        self.body_parent = [-1]
        self.body_joint = [None]
        self.body_dof = [-1]
        self.actuated = []
        for name in order[1:]:
            j = parent_joint[name]
            self.body_parent.append(self.body_index[j.parent])
            self.body_joint.append(j)
            if j.type == "revolute":
                self.body_dof.append(6 + len(self.actuated))
                self.actuated.append(j)
            else:
                self.body_dof.append(-1)
        # per-body joint constants: origin rotation, skew(axis), skew(axis)^2
        self.body_joint_consts = [None]
        for name in order[1:]:
            j = parent_joint[name]
            K = skew(j.axis)
            self.body_joint_consts.append((j.origin_rotation, np.asarray(j.origin_xyz, dtype=float),
                                           np.asarray(j.axis, dtype=float), K, K @ K))
        self.body_mass = np.array([by_name[n].mass for n in order])
        self.body_com = [np.asarray(by_name[n].com, dtype=float) for n in order]
        self.body_inertia = [np.asarray(by_name[n].inertia, dtype=float) for n in order]
        self.total_mass = float(self.body_mass.sum())
        self.frame_index = {f.name: f for f in self.frames}
        self._frame_rot = {f.name: rpy_matrix(f.rpy) for f in self.frames}
        self._limits = None

    @property
    def n(self):
        """Number of actuated joints."""
        return len(self.actuated)

    @property
    def nv(self):
        return self.n + 6

    @property
    def joint_names(self):
        return [j.name for j in self.actuated]

    def joint_limits(self):
        """(position, velocity, torque) limit arrays, each of shape (2, n); read-only."""
        if self._limits is None:
            out = []
            for key in ("position_limits", "velocity_limits", "torque_limits"):
                a = np.array([getattr(j, key) for j in self.actuated], dtype=float).T.reshape(2, -1)
                a.setflags(write=False)
                out.append(a)
            self._limits = tuple(out)
        return self._limits

    def frame(self, name):
        try:
            return self.frame_index[name]
        except KeyError:
            raise UnknownFrameError(name) from None

    def frame_rotation(self, name):
        self.frame(name)
        return self._frame_rot[name]

    def contacts_of(self, frame_name):
        return [c for c in self.contact_points if c.frame == frame_name]

    def selector(self):
        """Actuation selector B (nv x n)."""
        B = np.zeros((self.nv, self.n))
        B[6:, :] = np.eye(self.n)
        return B

    def check_state(self, state):
        if len(state.s) != self.n or len(state.sdot) != self.n:
            raise StateMismatchError(
                f"model has {self.n} joints, state has {len(state.s)} positions and {len(state.sdot)} velocities"
            )

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        return {
            "name": self.name,
            "base": self.base,
            "sole": {"half_length": self.sole_half_length, "half_width": self.sole_half_width},
            "links": [
                {"name": l.name, "mass": l.mass, "com": list(map(float, l.com)),
                 "inertia": np.asarray(l.inertia, dtype=float).tolist()}
                for l in self.links
            ],
            "joints": [
                {
                    "name": j.name, "type": j.type, "parent": j.parent, "child": j.child,
                    "axis": list(map(float, j.axis)),
                    "origin": {"xyz": list(map(float, j.origin_xyz)), "rpy": list(map(float, j.origin_rpy))},
                    "limits": {
                        "position": list(j.position_limits),
                        "velocity": list(j.velocity_limits),
                        "torque": list(j.torque_limits),
                    },
                }
                for j in self.joints
            ],
            "frames": [
                {"name": f.name, "link": f.link, "xyz": list(map(float, f.xyz)), "rpy": list(map(float, f.rpy))}
                for f in self.frames
            ],
            "contact_points": [
                {"name": c.name, "frame": c.frame, "xyz": list(map(float, c.xyz))} for c in self.contact_points
            ],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            links = [
                Link(l["name"], float(l["mass"]), np.array(l["com"], dtype=float), np.array(l["inertia"], dtype=float))
                for l in d["links"]
            ]
            joints = []
            for j in d["joints"]:
                lim = j.get("limits", {})
                origin = j.get("origin", {})
                joints.append(
                    Joint(
                        name=j["name"], parent=j["parent"], child=j["child"],
                        type=j.get("type", "revolute"),
                        axis=np.array(j.get("axis", [0.0, 1.0, 0.0]), dtype=float),
                        origin_xyz=np.array(origin.get("xyz", [0.0, 0.0, 0.0]), dtype=float),
                        origin_rpy=np.array(origin.get("rpy", [0.0, 0.0, 0.0]), dtype=float),
                        position_limits=tuple(lim.get("position", (-math.pi, math.pi))),
                        velocity_limits=tuple(lim.get("velocity", (-10.0, 10.0))),
                        torque_limits=tuple(lim.get("torque", (-100.0, 100.0))),
                    )
                )
            frames = [
                Frame(f["name"], f["link"], np.array(f.get("xyz", [0, 0, 0]), dtype=float),
                      np.array(f.get("rpy", [0, 0, 0]), dtype=float))
                for f in d.get("frames", [])
            ]
            contacts = [
                ContactPoint(c["name"], c["frame"], np.array(c["xyz"], dtype=float))
                for c in d.get("contact_points", [])
            ]
            sole = d.get("sole", {})
            base = d["base"]
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model description: {exc}") from exc
        return cls(links, joints, base, frames, contacts, name=d.get("name", "robot"),
                   sole_half_length=sole.get("half_length", 0.06), sole_half_width=sole.get("half_width", 0.03))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class RobotState:
    """Configuration (base pose, joint angles) and generalized velocity."""

    base_position: np.ndarray
    base_quat: np.ndarray
    s: np.ndarray
    base_lin_vel: np.ndarray = None
    base_ang_vel: np.ndarray = None
    sdot: np.ndarray = None

    def __post_init__(self):
        self.base_position = np.asarray(self.base_position, dtype=float).reshape(3)
        q = np.asarray(self.base_quat, dtype=float).reshape(-1)
        if q.shape == (9,):
            q = matrix_to_quat(q.reshape(3, 3))
        self.base_quat = q / np.linalg.norm(q)
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float)).copy()
        n = len(self.s)
        self.base_lin_vel = np.zeros(3) if self.base_lin_vel is None else np.asarray(self.base_lin_vel, dtype=float).reshape(3)
        self.base_ang_vel = np.zeros(3) if self.base_ang_vel is None else np.asarray(self.base_ang_vel, dtype=float).reshape(3)
        self.sdot = np.zeros(n) if self.sdot is None else np.atleast_1d(np.asarray(self.sdot, dtype=float)).copy()

    @classmethod
    def from_rotation(cls, position, R, s, nu=None):
        st = cls(position, matrix_to_quat(np.asarray(R, dtype=float)), s)
        if nu is not None:
            st.nu = nu
        return st

    @property
    def rotation(self):
        return quat_to_matrix(self.base_quat)

    @property
    def nu(self):
        return np.concatenate([self.base_lin_vel, self.base_ang_vel, self.sdot])

    @nu.setter
    def nu(self, value):
        value = np.asarray(value, dtype=float)
        if len(value) != 6 + len(self.s):
            raise StateMismatchError(f"velocity has {len(value)} entries, expected {6 + len(self.s)}")
        self.base_lin_vel = value[:3].copy()
        self.base_ang_vel = value[3:6].copy()
        self.sdot = value[6:].copy()

    def copy(self):
        return RobotState(self.base_position.copy(), self.base_quat.copy(), self.s.copy(),
                          self.base_lin_vel.copy(), self.base_ang_vel.copy(), self.sdot.copy())
