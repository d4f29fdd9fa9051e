"""Floating-base kinematics and dynamics on a kinematic tree.

All quantities are computed in world coordinates. The equations of motion
read ``M(q) nudot + h(q, nu) = B tau + sum_k J_k^T f_k`` with wrenches
``f_k = (force, moment)`` applied at frame origins, world-aligned.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .spatial import cross3, cross_force, cross_motion, skew, spatial_inertia

GRAVITY = np.array([0.0, 0.0, -9.81])
_SB_TEMPLATE = np.zeros((6, 6))
_SB_TEMPLATE[:3, 3:] = np.eye(3)
_SB_TEMPLATE[3:, :3] = np.eye(3)


@dataclass
class Wrench:
    force: np.ndarray
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame: str = "world"

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float).reshape(3)
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.force)) and np.all(np.isfinite(self.moment))):
            raise ValueError("wrench components must be finite")

    @property
    def vector(self):
        return np.concatenate([self.force, self.moment])


@dataclass
class CentroidalMomentum:
    linear: np.ndarray
    angular: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.linear, self.angular])


class TreeKinematics:
    """Forward kinematics of one state plus cached intermediate quantities.

    Building one of these does the position-level pass; the dynamics
    methods reuse it, so a simulation step touches the tree only a few
    times.
    """

    def __init__(self, model, state):
        model.check_state(state)
        self.model = model
        self.state = state
        nb = len(model.body_names)
        R = [None] * nb
        p = [None] * nb
        S = [None] * nb
        R[0] = state.rotation
        p[0] = state.base_position
        s = state.s
        eye3 = np.eye(3)
        for i in range(1, nb):
            par = model.body_parent[i]
            R0, xyz, axis, K, K2 = model.body_joint_consts[i]
            Rj = R[par] @ R0
            pj = p[par] + R[par] @ xyz
            if model.body_dof[i] >= 0:
                a = Rj @ axis
                angle = s[model.body_dof[i] - 6]
                R[i] = Rj @ (eye3 + math.sin(angle) * K + (1.0 - math.cos(angle)) * K2)
                S[i] = np.concatenate([a, cross3(pj, a)])
            else:
                R[i] = Rj
            p[i] = pj
        self.R = R
        self.p = p
        self.S = S
        self.com_w = [p[i] + R[i] @ model.body_com[i] for i in range(nb)]
        self.inertia = [
            spatial_inertia(model.body_mass[i], self.com_w[i], R[i] @ model.body_inertia[i] @ R[i].T)
            for i in range(nb)
        ]
        SB = _SB_TEMPLATE.copy()
        SB[3:, 3:] = skew(p[0])
        self.S_base = SB
        self._composite = None
        self._velocity = None

    # -- helpers ---------------------------------------------------------
    def _chain(self, body):
        out = []
        b = body
        while b > 0:
            if self.S[b] is not None:
                out.append(b)
            b = self.model.body_parent[b]
        return out

    @property
    def composite(self):
        if self._composite is None:
            Ic = [I.copy() for I in self.inertia]
            for i in range(len(Ic) - 1, 0, -1):
                Ic[self.model.body_parent[i]] += Ic[i]
            self._composite = Ic
        return self._composite

    @property
    def body_velocity(self):
        if self._velocity is None:
            st = self.state
            V = [None] * len(self.p)
            V[0] = self.S_base @ np.concatenate([st.base_lin_vel, st.base_ang_vel])
            for i in range(1, len(V)):
                V[i] = V[self.model.body_parent[i]].copy()
                if self.S[i] is not None:
                    V[i] += self.S[i] * st.sdot[self.model.body_dof[i] - 6]
            self._velocity = V
        return self._velocity

    def body_jacobian(self, body):
        """Spatial (world-origin) Jacobian of a body, shape (6, nv)."""
        J = np.zeros((6, self.model.nv))
        J[:, :6] = self.S_base
        for b in self._chain(body):
            J[:, self.model.body_dof[b]] = self.S[b]
        return J

    def point_jacobian(self, body, point):
        """[linear; angular] Jacobian of a body-fixed point given in world coordinates."""
        Js = self.body_jacobian(body)
        out = np.empty_like(Js)
        out[:3] = Js[3:] - skew(point) @ Js[:3]
        out[3:] = Js[:3]
        return out

    def point_velocity(self, body, point):
        V = self.body_velocity[body]
        return V[3:] + cross3(V[:3], point), V[:3].copy()

    def bias_spatial_accelerations(self, gravity=None, nudot=None):
        st = self.state
        model = self.model
        v_lin, w = st.base_lin_vel, st.base_ang_vel
        A = [None] * len(self.p)
        a0 = np.zeros(6)
        a0[3:] = cross3(v_lin, w)
        if nudot is not None:
            a0 += self.S_base @ nudot[:6]
        if gravity is not None:
            a0[3:] -= gravity
        A[0] = a0
        V = self.body_velocity
        for i in range(1, len(A)):
            A[i] = A[model.body_parent[i]].copy()
            if self.S[i] is not None:
                k = model.body_dof[i] - 6
                A[i] += cross_motion(V[i], self.S[i]) * st.sdot[k]
                if nudot is not None:
                    A[i] += self.S[i] * nudot[6 + k]
        return A

    # -- dynamics --------------------------------------------------------
    def mass_matrix(self):
        model = self.model
        nv = model.nv
        M = np.zeros((nv, nv))
        Ic = self.composite
        SB = self.S_base
        M[:6, :6] = SB.T @ Ic[0] @ SB
        for i in range(1, len(Ic)):
            if self.S[i] is None:
                continue
            k = model.body_dof[i]
            F = Ic[i] @ self.S[i]
            M[k, k] = self.S[i] @ F
            b = model.body_parent[i]
            while b > 0:
                if self.S[b] is not None:
                    kb = model.body_dof[b]
                    M[kb, k] = M[k, kb] = self.S[b] @ F
                b = model.body_parent[b]
            col = SB.T @ F
            M[:6, k] = col
            M[k, :6] = col
        return M

    def inverse_dynamics(self, nudot, gravity=GRAVITY):
        """Generalized forces ``M nudot + h`` by recursive Newton-Euler."""
        model = self.model
        A = self.bias_spatial_accelerations(gravity, np.asarray(nudot, dtype=float))
        V = self.body_velocity
        f = [self.inertia[i] @ A[i] + cross_force(V[i], self.inertia[i] @ V[i]) for i in range(len(A))]
        out = np.zeros(model.nv)
        for i in range(len(f) - 1, 0, -1):
            if self.S[i] is not None:
                out[model.body_dof[i]] = self.S[i] @ f[i]
            f[model.body_parent[i]] = f[model.body_parent[i]] + f[i]
        out[:6] = self.S_base.T @ f[0]
        return out

    def bias_forces(self, gravity=GRAVITY):
        return self.inverse_dynamics(np.zeros(self.model.nv), gravity)

    # -- frames and centroidal quantities --------------------------------
    def frame_pose(self, name):
        f = self.model.frame(name)
        b = self.model.body_index[f.link]
        return self.p[b] + self.R[b] @ f.xyz, self.R[b] @ self.model.frame_rotation(name)

    def frame_jacobian(self, name):
        f = self.model.frame(name)
        b = self.model.body_index[f.link]
        return self.point_jacobian(b, self.p[b] + self.R[b] @ f.xyz)

    def frame_bias_acceleration(self, name):
        f = self.model.frame(name)
        b = self.model.body_index[f.link]
        return self._point_bias(b, self.p[b] + self.R[b] @ f.xyz, self.bias_spatial_accelerations())

    def _point_bias(self, body, point, A):
        V = self.body_velocity[body]
        w = V[:3]
        v_pt = V[3:] + cross3(w, point)
        a = A[body]
        return np.concatenate([a[3:] + cross3(a[:3], point) + cross3(w, v_pt), a[:3]])

    def com_position(self):
        m = self.model.body_mass
        return sum(m[i] * self.com_w[i] for i in range(len(m))) / self.model.total_mass

    def com_jacobian(self):
        m = self.model.body_mass
        J = np.zeros((3, self.model.nv))
        for i in range(len(m)):
            J += m[i] * self.point_jacobian(i, self.com_w[i])[:3]
        return J / self.model.total_mass

    def com_bias_acceleration(self):
        A = self.bias_spatial_accelerations()
        m = self.model.body_mass
        acc = np.zeros(3)
        for i in range(len(m)):
            acc += m[i] * self._point_bias(i, self.com_w[i], A)[:3]
        return acc / self.model.total_mass

    def centroidal_momentum_matrix(self):
        """J_M with rows (linear momentum; angular momentum about the CoM)."""
        model = self.model
        Ic = self.composite
        AO = np.zeros((6, model.nv))
        AO[:, :6] = Ic[0] @ self.S_base
        for i in range(1, len(Ic)):
            if self.S[i] is not None:
                AO[:, model.body_dof[i]] = Ic[i] @ self.S[i]
        c = self.com_position()
        out = np.empty_like(AO)
        out[:3] = AO[3:]
        out[3:] = AO[:3] - skew(c) @ AO[3:]
        return out

    def centroidal_momentum(self):
        h = self.centroidal_momentum_matrix() @ self.state.nu
        return CentroidalMomentum(h[:3], h[3:])

    def locked_inertia(self):
        """Composite rotational inertia about the CoM."""
        Ic0 = self.composite[0]
        c = skew(self.com_position())
        return Ic0[:3, :3] - self.model.total_mass * (c @ c.T)

    def energy(self, gravity=GRAVITY):
        nu = self.state.nu
        kin = 0.5 * nu @ self.mass_matrix() @ nu
        pot = -self.model.total_mass * gravity @ self.com_position()
        return kin + pot


# -- functional API -------------------------------------------------------

def mass_matrix(model, state):
    return TreeKinematics(model, state).mass_matrix()


def bias_forces(model, state, gravity=GRAVITY):
    return TreeKinematics(model, state).bias_forces(np.asarray(gravity, dtype=float))


def inverse_dynamics(model, state, nudot, gravity=GRAVITY):
    return TreeKinematics(model, state).inverse_dynamics(nudot, np.asarray(gravity, dtype=float))


def frame_jacobian(model, state, frame):
    return TreeKinematics(model, state).frame_jacobian(frame)


def frame_bias_acceleration(model, state, frame):
    return TreeKinematics(model, state).frame_bias_acceleration(frame)


def frame_pose(model, state, frame):
    return TreeKinematics(model, state).frame_pose(frame)


def com_position(model, state):
    return TreeKinematics(model, state).com_position()


def com_jacobian(model, state):
    return TreeKinematics(model, state).com_jacobian()


def centroidal_momentum_matrix(model, state):
    return TreeKinematics(model, state).centroidal_momentum_matrix()


def centroidal_momentum(model, state):
    return TreeKinematics(model, state).centroidal_momentum()


def contact_generalized_force(kin, contacts):
    """Sum of ``J^T f`` over (frame name, Wrench) pairs."""
    out = np.zeros(kin.model.nv)
    for frame, w in contacts:
        out += kin.frame_jacobian(frame).T @ w.vector
    return out


def forward_dynamics(model, state, tau, contacts=(), gravity=GRAVITY, kin=None):
    """Solve ``M nudot = B tau + sum J^T f - h`` for ``nudot``."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.n,):
        raise ValueError(f"expected {model.n} joint torques, got shape {tau.shape}")
    if not np.all(np.abs(tau) < 1e6):
        raise ValueError("joint torque outside the +/-1e6 guard")
    kin = kin or TreeKinematics(model, state)
    M = kin.mass_matrix()
    rhs = -kin.bias_forces(np.asarray(gravity, dtype=float))
    rhs[6:] += tau
    rhs += contact_generalized_force(kin, contacts)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("mass matrix is not positive definite") from exc
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))
