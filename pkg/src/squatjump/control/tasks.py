"""Launch-phase QPs: joint-velocity and joint-torque formulations.

Both builders return a :class:`TickProblem` holding the QP plus enough
bookkeeping to check the equality tasks afterwards. ``velocity_tick`` and
``torque_tick`` assemble, solve and update the controller state.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..multibody.dynamics import GRAVITY
from ..multibody.spatial import skew
from ..qpsolver import INF, ActiveSetSolver, QpProblem


class ControllerFault(RuntimeError):
    """The launch QP had no solution; ``problem`` holds the offending QP."""

    def __init__(self, message, problem=None, t=None):
        super().__init__(message)
        self.problem = problem
        self.t = t


@dataclass
class ControlOutput:
    mode: str  # "velocity" | "torque" | "position"
    command: np.ndarray
    qp: object = None
    solution: object = None
    clamped: bool = False
    forces: np.ndarray = None  # torque mode: solved foot wrenches (12,)
    task_residual: float = 0.0
    contact_violation: float = 0.0
    dropped_residual: float = 0.0  # includes rows implied by others (noise level)
    velocity_ref: np.ndarray = None  # position mode: feed-forward joint velocity


@dataclass
class TickProblem:
    qp: QpProblem
    n_eq: int  # the first n_eq rows are the equality tasks
    meta: dict = field(default_factory=dict)


def independent_rows(A, tol=1e-9):
    """Indices of rows of ``A`` that are independent of the rows before them."""
    basis = []
    keep = []
    for i, a in enumerate(A):
        r = a.copy()
        for q in basis:
            r -= (q @ r) * q
        nr = np.linalg.norm(r)
        if nr > tol * max(1.0, np.linalg.norm(a)):
            basis.append(r / nr)
            keep.append(i)
    return keep


def _stack(rows):
    """Stack equality tasks, dropping rows implied by earlier ones.

    On a planar robot with both feet on the ground, several task rows
    (lateral CoM, roll/yaw momentum, the second foot) are combinations
    of others; their targets only carry numerical noise, which would
    make the stacked equalities inconsistent. Returns the reduced system
    and the full one (for residual reporting).
    """
    A = np.vstack([r[0] for r in rows])
    b = np.concatenate([r[1] for r in rows])
    keep = independent_rows(A)
    return A[keep], b[keep], A, b


def com_targets(cstate, profile, t, tail_deceleration=None):
    """Desired CoM position, velocity, acceleration at launch time ``t``.

    Past the take-off time the vertical target decelerates at
    ``tail_deceleration`` (default: gravity, a ballistic continuation).
    """
    T = profile.duration
    if tail_deceleration is None or t <= T:
        z, zd, zdd = profile.evaluate(t)
    else:
        zT, v, _ = profile.evaluate(T)
        d = t - T
        z, zd, zdd = zT + v * d - 0.5 * tail_deceleration * d * d, v - tail_deceleration * d, -tail_deceleration
    x_des = cstate.com_ref + np.array([0.0, 0.0, z])
    return x_des, np.array([0.0, 0.0, zd]), np.array([0.0, 0.0, zdd])


def build_velocity_qp(model, meas, profile, t, gains, cstate, config):
    n, nv = model.n, model.nv
    kin = meas.kin
    st = meas.state
    lam, dlt = gains.weights(n)
    sdot_star = -gains.Kp_post * (st.s - cstate.s_d)
    H = np.zeros((nv, nv))
    H[6:, 6:] = np.diag(lam + dlt)
    g = np.zeros(nv)
    g[6:] = -(lam * sdot_star + dlt * cstate.prev_command)

    x_des, xd_des, _ = com_targets(cstate, profile, t, config.release_deceleration * profile.gravity)
    rows = [(kin.frame_jacobian(f), np.zeros(6)) for f in cstate.foot_frames]
    rows.append((kin.com_jacobian(), xd_des - gains.K_com * (meas.com_estimate - x_des)))
    if not config.disable_momentum_constraint:
        rows.append((meas.cmm[3:], -gains.K_H * cstate.H_integral))
    A_eq, b_eq, A_all, b_all = _stack(rows)

    pos, vel, _ = model.joint_limits()
    Ts = config.period
    lo = np.maximum(vel[0], (pos[0] - st.s) / Ts)
    hi = np.minimum(vel[1], (pos[1] - st.s) / Ts)
    S = np.zeros((n, nv))
    S[:, 6:] = np.eye(n)
    A = np.vstack([A_eq, S])
    lb = np.concatenate([b_eq, lo])
    ub = np.concatenate([b_eq, hi])
    return TickProblem(QpProblem(H, g, A, lb, ub), len(b_eq), {"tasks": (A_all, b_all)})


def _residuals(tp, x):
    """Max residual of the enforced task rows and of all task rows."""
    q = tp.qp
    res = float(np.abs(q.A[: tp.n_eq] @ x - q.lb[: tp.n_eq]).max())
    A_all, b_all = tp.meta["tasks"]
    return res, float(np.abs(A_all @ x - b_all).max())


def velocity_tick(model, meas, profile, t, gains, cstate, config, solver=None):
    """One joint-velocity QP; returns the joint-velocity command."""
    solver = solver or ActiveSetSolver()
    cstate.accumulate_momentum(meas, t, config.period)
    tp = build_velocity_qp(model, meas, profile, t, gains, cstate, config)
    x0 = np.concatenate([meas.state.nu[:6], cstate.prev_command])
    sol = solver.solve(tp.qp, x0=x0, active_set=cstate.active_set)
    if not sol.solved:
        raise ControllerFault(f"velocity QP {sol.status} at t={t:.4f}", tp.qp, t)
    cstate.active_set = sol.active_set
    cmd = sol.x[6:].copy()
    cstate.prev_command = cmd
    res, dropped = _residuals(tp, sol.x)
    return ControlOutput("velocity", cmd, tp.qp, sol, task_residual=res, dropped_residual=dropped)


def contact_rows(model, R_foot, friction, min_force):
    """Inequality rows on one foot wrench (F, mu), world-aligned input.

    Returns ``(C, lo, hi)``: normal force floor, 4-facet friction pyramid
    and the CoP box, all written in the sole frame.
    """
    w, l = model.sole_half_width, model.sole_half_length
    local = np.zeros((9, 6))
    lo = np.full(9, -INF)
    hi = np.zeros(9)
    local[0, 2] = 1.0
    lo[0], hi[0] = min_force, INF
    # |F_x| <= mu F_z, |F_y| <= mu F_z
    for k, (axis, sign) in enumerate(((0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0))):
        local[1 + k, axis] = sign
        local[1 + k, 2] = -friction
    # CoP: |mu_x| <= w F_z, |mu_y| <= l F_z
    for k, (axis, sign, half) in enumerate(((3, 1.0, w), (3, -1.0, w), (4, 1.0, l), (4, -1.0, l))):
        local[5 + k, axis] = sign
        local[5 + k, 2] = -half
    rot = np.zeros((6, 6))
    rot[:3, :3] = R_foot.T
    rot[3:, 3:] = R_foot.T
    return local @ rot, lo, hi


def build_torque_qp(model, meas, profile, t, gains, cstate, config, gravity=GRAVITY):
    n, nv = model.n, model.nv
    nf = 6 * len(cstate.foot_frames)
    nu_ = n + nf
    kin = meas.kin
    st = meas.state
    M = kin.mass_matrix()
    h = kin.bias_forces(gravity)
    Jf = np.vstack([kin.frame_jacobian(f) for f in cstate.foot_frames])
    Bm = np.zeros((nv, n))
    Bm[6:] = np.eye(n)
    cf = cho_factor(M)
    G = cho_solve(cf, np.hstack([Bm, Jf.T]))
    a0 = -cho_solve(cf, h)
    SG, sa0 = G[6:], a0[6:]

    lam, dlt = gains.weights(n)
    sdd_star = -gains.Kd_post * st.sdot - gains.Kp_post * (st.s - cstate.s_d)
    Hq = SG.T @ (lam[:, None] * SG)
    Hq[:n, :n] += np.diag(dlt)
    Hq[n:, n:] += gains.wrench_regularization * np.eye(nf)
    gq = SG.T @ (lam * (sa0 - sdd_star))
    gq[:n] -= dlt * cstate.prev_command

    x_des, xd_des, xdd_des = com_targets(cstate, profile, t, config.release_deceleration * profile.gravity)
    Jc = kin.com_jacobian()
    # measured CoM: differentiating the rigid-foot estimate amplifies foot rocking on soft ground
    acc = xdd_des - gains.Kp_com * (meas.com - x_des) - gains.Kd_com * (meas.com_vel - xd_des)
    rows = []
    for i, f in enumerate(cstate.foot_frames):
        J = Jf[6 * i: 6 * i + 6]
        rows.append((J @ G, -kin.frame_bias_acceleration(f) - J @ a0))
    rows.append((Jc @ G, acc - kin.com_bias_acceleration() - Jc @ a0))
    if not config.disable_momentum_constraint:
        Am = np.zeros((3, nu_))
        c = meas.com
        for i, f in enumerate(cstate.foot_frames):
            p, _ = kin.frame_pose(f)
            # moment about the CoM of a wrench applied at the foot frame
            Am[:, n + 6 * i: n + 6 * i + 3] = skew(p - c)
            Am[:, n + 6 * i + 3: n + 6 * i + 6] = np.eye(3)
        rows.append((Am, -gains.K_H * meas.momentum[3:]))
    A_eq, b_eq, A_all, b_all = _stack(rows)

    pos, vel, tau = model.joint_limits()
    Ts = config.period
    sd = st.sdot
    acc_lo = np.maximum((vel[0] - sd) / Ts, 2.0 * (pos[0] - st.s - sd * Ts) / Ts ** 2)
    acc_hi = np.minimum((vel[1] - sd) / Ts, 2.0 * (pos[1] - st.s - sd * Ts) / Ts ** 2)
    T_rows = np.zeros((n, nu_))
    T_rows[:, :n] = np.eye(n)
    blocks = [A_eq, T_rows, SG]
    lbs = [b_eq, tau[0], acc_lo - sa0]
    ubs = [b_eq, tau[1], acc_hi - sa0]
    for i, f in enumerate(cstate.foot_frames):
        _, R = kin.frame_pose(f)
        C, lo, hi = contact_rows(model, R, config.friction, config.min_normal_force)
        Cu = np.zeros((len(lo), nu_))
        Cu[:, n + 6 * i: n + 6 * i + 6] = C
        blocks.append(Cu)
        lbs.append(lo)
        ubs.append(hi)
    A = np.vstack(blocks)
    qp = QpProblem(0.5 * (Hq + Hq.T), gq, A, np.concatenate(lbs), np.concatenate(ubs))
    return TickProblem(qp, len(b_eq), {"contact_start": len(b_eq) + 2 * n, "tasks": (A_all, b_all)})


def torque_tick(model, meas, profile, t, gains, cstate, config, solver=None):
    """One joint-torque QP over ``[tau; foot wrenches]``; returns the torques."""
    solver = solver or ActiveSetSolver()
    tp = build_torque_qp(model, meas, profile, t, gains, cstate, config)
    n = model.n
    x0 = None
    if cstate.prev_solution is not None and len(cstate.prev_solution) == tp.qp.n_vars:
        x0 = cstate.prev_solution
    sol = solver.solve(tp.qp, x0=x0, active_set=cstate.active_set)
    if not sol.solved:
        raise ControllerFault(f"torque QP {sol.status} at t={t:.4f}", tp.qp, t)
    cstate.active_set = sol.active_set
    cstate.prev_solution = sol.x.copy()
    tau = sol.x[:n].copy()
    cstate.prev_command = tau
    q = tp.qp
    res, dropped = _residuals(tp, sol.x)
    k0 = tp.meta["contact_start"]
    Cx = q.A[k0:] @ sol.x
    viol = float(max(np.max(q.lb[k0:] - Cx), np.max(Cx - q.ub[k0:]), 0.0))
    return ControlOutput("torque", tau, q, sol, forces=sol.x[n:].copy(), task_residual=res,
                         dropped_residual=dropped, contact_violation=viol)
