"""Fixed-step simulation with compliant ground contact.

Each physics step evaluates the penalty contact forces, applies the joint
servo selected by the command mode, integrates with semi-implicit Euler
and finally corrects the free-floating base so the centroidal momentum
and CoM follow the momentum balance of the applied external forces (see
``SimConfig.momentum_projection``).
"""

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .control import LANDING, PHASE_CODES, ControllerFault, JumpController
from .control.tasks import com_targets
from .multibody.dynamics import TreeKinematics
from .multibody.model import RobotState
from .multibody.robots import default_squat
from .multibody.spatial import cross3, integrate_quat, pitch_of


class SimFault(RuntimeError):
    pass


@dataclass
class ContactModel:
    ground: float = 0.0
    stiffness: float = 1e5
    damping: float = 1e3
    friction: float = 0.8
    v_reg: float = 1e-3

    def __post_init__(self):
        if not (self.stiffness > 0.0 and self.damping > 0.0 and self.v_reg > 0.0):
            raise ValueError("contact stiffness, damping and v_reg must be positive")
        if self.friction < 0.0:
            raise ValueError("friction coefficient must be non-negative")


@dataclass
class ServoGains:
    velocity_kp: float = 400.0  # N m s/rad
    velocity_ki: float = 8000.0  # N m/rad
    position_kp: float = 3000.0  # N m/rad
    position_kd: float = 60.0  # N m s/rad

    def __post_init__(self):
        if min(self.velocity_kp, self.position_kp, self.position_kd) <= 0.0 or self.velocity_ki < 0.0:
            raise ValueError("servo gains must be positive")


@dataclass
class SimConfig:
    dt: float = 1e-4
    control_period: float = 0.0025
    duration: float = 2.0  # hard cap on launch-clock time
    gravity: tuple = (0.0, 0.0, -9.81)
    settle_time: float = 0.1
    post_landing: float = 0.3
    contact: ContactModel = field(default_factory=ContactModel)
    servo: ServoGains = field(default_factory=ServoGains)
    momentum_projection: bool = True

    def __post_init__(self):
        if isinstance(self.contact, dict):
            self.contact = ContactModel(**self.contact)
        if isinstance(self.servo, dict):
            self.servo = ServoGains(**self.servo)
        self.gravity = tuple(float(v) for v in self.gravity)
        if not self.dt > 0.0:
            raise ValueError("step size must be positive")
        ratio = self.control_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("control period must be an integer multiple of the step size")
        if self.settle_time < 0.0 or self.post_landing < 0.0 or not self.duration > 0.0:
            raise ValueError("settle time and post-landing time must be non-negative, duration positive")

    @property
    def substeps(self):
        return int(round(self.control_period / self.dt))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sim settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["gravity"] = list(self.gravity)
        return out


@dataclass
class ContactReport:
    positions: np.ndarray  # (k, 3) contact point positions
    forces: np.ndarray  # (k, 3) world forces on the robot
    foot_wrenches: dict  # frame -> (6,) [force; moment] about the frame origin
    total_normal_force: float
    generalized: np.ndarray = None
    damping: np.ndarray = None  # d(generalized)/d(nu), negated; used implicitly
    point_damping: list = field(default_factory=list)  # (point index, J_point, K_point)


@dataclass
class Measurement:
    state: RobotState
    kin: TreeKinematics
    com: np.ndarray
    com_vel: np.ndarray
    com_estimate: np.ndarray
    com_vel_estimate: np.ndarray
    momentum: np.ndarray  # (6,) linear; angular about the CoM
    cmm: np.ndarray
    foot_wrenches: dict
    total_normal_force: float


def _contact_geometry(model):
    """Per contact point: (body index, frame name, point in body coordinates)."""
    out = []
    for cp in model.contact_points:
        f = model.frame(cp.frame)
        b = model.body_index[f.link]
        out.append((b, cp.frame, f.xyz + model.frame_rotation(cp.frame) @ cp.xyz))
    return out


def contact_forces(kin, contact, geometry=None):
    """Penalty forces at every contact point plus their generalized force."""
    model = kin.model
    geometry = geometry or _contact_geometry(model)
    k = len(geometry)
    P = np.zeros((k, 3))
    F = np.zeros((k, 3))
    gen = np.zeros(model.nv)
    Cd = np.zeros((model.nv, model.nv))
    terms = []
    wrenches = {}
    total = 0.0
    for i, (b, frame, local) in enumerate(geometry):
        p = kin.p[b] + kin.R[b] @ local
        P[i] = p
        depth = contact.ground - p[2]
        if depth > 0.0:
            v, _ = kin.point_velocity(b, p)
            fz = max(0.0, contact.stiffness * depth - contact.damping * v[2])
            if fz > 0.0:
                vt = v[:2]
                speed = math.hypot(vt[0], vt[1])
                mu = contact.friction * fz
                u = speed / contact.v_reg
                ft = np.zeros(2)
                # Jacobian of -F_t with respect to v_t (regularized Coulomb is a stiff damper)
                if speed > 1e-12:
                    e = vt / speed
                    th = math.tanh(u)
                    ft = -mu * th * e
                    Kt = mu * ((1.0 - th * th) / contact.v_reg * np.outer(e, e) + th / speed * (np.eye(2) - np.outer(e, e)))
                else:
                    Kt = mu / contact.v_reg * np.eye(2)
                F[i] = (ft[0], ft[1], fz)
                total += fz
                Jp = kin.point_jacobian(b, p)[:3]
                gen += Jp.T @ F[i]
                Kp = np.zeros((3, 3))
                Kp[:2, :2] = Kt
                Kp[2, 2] = contact.damping
                Cd += Jp.T @ Kp @ Jp
                terms.append((i, Jp, Kp))
    for i, (b, frame, local) in enumerate(geometry):
        o, _ = kin.frame_pose(frame)
        w = wrenches.setdefault(frame, np.zeros(6))
        w[:3] += F[i]
        w[3:] += cross3(P[i] - o, F[i])
    return ContactReport(P, F, wrenches, total, gen, Cd, terms)


class World:
    """Robot state plus servo memory; advanced by :meth:`step`."""

    def __init__(self, model, state, config=None):
        self.model = model
        self.state = state.copy()
        self.config = config or SimConfig()
        self.gravity = np.array(self.config.gravity)
        self.geometry = _contact_geometry(model)
        self.integral = np.zeros(model.n)
        self.tau = np.zeros(model.n)
        self.time = 0.0
        self.report = contact_forces(TreeKinematics(model, self.state), self.config.contact, self.geometry)

    def preload_servo(self):
        """Set the velocity-servo integrator to the current static joint torques."""
        kin = TreeKinematics(self.model, self.state)
        rep = contact_forces(kin, self.config.contact, self.geometry)
        self.integral = (kin.bias_forces(self.gravity) - rep.generalized)[6:]
        _, _, lim = self.model.joint_limits()
        self.integral = np.clip(self.integral, lim[0], lim[1])

    def step(self, mode, command, velocity_ref=None):
        """Advance one physics step; returns the contact report at its start."""
        model, cfg, st = self.model, self.config, self.state
        dt, n = cfg.dt, model.n
        kin = TreeKinematics(model, st)
        rep = contact_forces(kin, cfg.contact, self.geometry)
        M = kin.mass_matrix()
        h = kin.bias_forces(self.gravity)
        _, _, lim = model.joint_limits()
        sv = cfg.servo
        if mode == "torque":
            tau_e = np.clip(command, lim[0], lim[1])
            D = np.zeros(n)
        elif mode == "velocity":
            tau_e = sv.velocity_kp * (command - st.sdot) + self.integral
            D = np.full(n, sv.velocity_kp)
        elif mode == "position":
            vref = np.zeros(n) if velocity_ref is None else velocity_ref
            tau_e = sv.position_kp * (command - st.s) + sv.position_kd * (vref - st.sdot)
            D = np.full(n, sv.position_kd)
        elif mode == "passive":
            tau_e, D = np.zeros(n), np.zeros(n)
        else:
            raise ValueError(f"unknown command mode {mode!r}")
        rhs0 = rep.generalized - h
        # linearly implicit damping: contact damping and servo damping
        # (tau = tau_e - dt D sddot) enter the matrix; saturated joints drop out
        M = M + dt * rep.damping
        for _ in range(n + 1):
            A = M.copy()
            A[6:, 6:] += dt * np.diag(D)
            rhs = rhs0.copy()
            rhs[6:] += tau_e
            nudot = np.linalg.solve(A, rhs)
            tau = tau_e - dt * D * nudot[6:]
            over = (tau > lim[1] + 1e-12) | (tau < lim[0] - 1e-12)
            if not over.any():
                break
            tau_e = np.where(over, np.clip(tau, lim[0], lim[1]), tau_e)
            D = np.where(over, 0.0, D)
        self.tau = tau
        nu_old = st.nu
        nu = nu_old + dt * nudot
        if mode == "velocity" and sv.velocity_ki > 0.0:
            self.integral = np.clip(self.integral + sv.velocity_ki * dt * (command - nu[6:]), lim[0], lim[1])

        new = st.copy()
        new.nu = nu
        new.base_position = st.base_position + dt * nu[:3]
        new.base_quat = integrate_quat(st.base_quat, nu[3:6], dt)
        new.s = st.s + dt * nu[6:]
        if cfg.momentum_projection:
            # forces actually applied over the step, including the implicit damping increment
            forces = rep.forces.copy()
            dnu = nu - nu_old
            for i, Jp, Kp in rep.point_damping:
                forces[i] -= Kp @ (Jp @ dnu)
            self._project(kin, rep.positions, forces, new)
        if not (np.all(np.isfinite(new.nu)) and np.all(np.isfinite(new.base_position))
                and np.all(np.isfinite(new.s)) and np.abs(new.nu).max() < 1e4):
            raise SimFault(f"non-finite or runaway state at t={self.time + dt:.4f}")
        self.state = new
        self.time += dt
        self.report = rep
        return rep

    def _project(self, kin, positions, forces, new):
        """Make momentum and CoM consistent with the external forces of this step.

        The linear and angular centroidal momentum are set to their values
        from the momentum balance over the step (external forces are
        constant over it), and the CoM to the trapezoidal integral of the
        linear momentum. Only the base pose and twist are touched.
        """
        model, dt = self.model, self.config.dt
        m = model.total_mass
        c0 = kin.com_position()
        H0 = kin.centroidal_momentum_matrix() @ kin.state.nu
        W = np.zeros(6)
        W[:3] = forces.sum(axis=0) + m * self.gravity
        for p, f in zip(positions, forces):
            W[3:] += cross3(p - c0, f)
        H1 = H0 + dt * W
        kin1 = TreeKinematics(model, new)
        J = kin1.centroidal_momentum_matrix()
        nu = new.nu
        nu[:6] += np.linalg.solve(J[:, :6], H1 - J @ nu)
        new.nu = nu
        c_target = c0 + 0.5 * dt * (H0[:3] + H1[:3]) / m
        new.base_position = new.base_position + (c_target - kin1.com_position())


def leg_kinematics_estimate(model, s, sdot, foot_frame, foot_pose):
    """CoM position/velocity assuming ``foot_frame`` sits still at ``foot_pose``."""
    p_nom, R_nom = foot_pose
    kin0 = TreeKinematics(model, RobotState.from_rotation(np.zeros(3), np.eye(3), s))
    p_f0, R_f0 = kin0.frame_pose(foot_frame)
    R_B = R_nom @ R_f0.T
    st = RobotState.from_rotation(p_nom - R_B @ p_f0, R_B, s)
    kin = TreeKinematics(model, st)
    Jf = kin.frame_jacobian(foot_frame)
    vb = -np.linalg.solve(Jf[:, :6], Jf[:, 6:] @ sdot)
    return kin.com_position(), kin.com_jacobian() @ np.concatenate([vb, sdot])


def measure(world, foot_frame, foot_pose, report=None):
    """Measurement bundle: true state quantities plus the leg-kinematics CoM estimate."""
    model = world.model
    st = world.state
    kin = TreeKinematics(model, st)
    rep = report or contact_forces(kin, world.config.contact, world.geometry)
    J = kin.centroidal_momentum_matrix()
    H = J @ st.nu
    est, est_v = leg_kinematics_estimate(model, st.s, st.sdot, foot_frame, foot_pose)
    return Measurement(
        state=st,
        kin=kin,
        com=kin.com_position(),
        com_vel=H[:3] / model.total_mass,
        com_estimate=est,
        com_vel_estimate=est_v,
        momentum=H,
        cmm=J,
        foot_wrenches=rep.foot_wrenches,
        total_normal_force=rep.total_normal_force,
    )


class JumpLog:
    """Per-tick time series with named columns."""

    def __init__(self, joint_names, foot_frames):
        cols = ["t", "phase", "com_x_true", "com_y_true", "com_z_true", "com_vx_true", "com_vy_true",
                "com_vz_true", "com_x_estimated", "com_z_estimated", "com_z_desired", "com_vz_desired"]
        for j in joint_names:
            cols += [f"{j}_pos", f"{j}_vel", f"{j}_cmd", f"{j}_tau"]
        for f in foot_frames:
            cols += [f"{f}_{c}" for c in ("fx", "fy", "fz", "mx", "my", "mz")]
        cols += ["H_lx", "H_ly", "H_lz", "H_wx", "H_wy", "H_wz", "base_pitch", "feet_height",
                 "total_normal_force", "task_residual", "contact_violation"]
        self.columns = cols
        self.rows = []
        self._index = {c: i for i, c in enumerate(cols)}

    def append(self, values):
        if len(values) != len(self.columns):
            raise ValueError("log row has the wrong number of columns")
        if self.rows and not values[0] > self.rows[-1][0]:
            raise ValueError("log times must increase strictly")
        self.rows.append([float(v) for v in values])

    def column(self, name):
        i = self._index[name]
        return np.array([r[i] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".10g")


SUMMARY_FIELDS = (
    "status", "fault", "desired_takeoff_speed", "planned_takeoff_time", "takeoff_time", "takeoff_speed",
    "takeoff_angular_momentum", "flight_com_rise", "peak_feet_height", "base_pitch_excursion_deg",
    "flight_time", "predicted_flight_time", "predicted_apex_rise", "landing_impact_force", "launch_impulse",
    "expected_launch_impulse", "feet_drift_launch", "peak_joint_speed", "peak_joint_torque",
    "max_task_residual", "max_contact_violation",
)


@dataclass
class JumpResult:
    log: JumpLog
    summary: dict
    status: str
    fault: str = None
    failed_qp: object = None


def initial_state(model, contact, squat=None):
    """Default squat resting on the compliant ground at its static sink."""
    sink = model.total_mass * 9.81 / (len(model.contact_points) * contact.stiffness)
    if squat is None:
        return default_squat(model, ground=contact.ground, sink=sink)
    return squat(model, ground=contact.ground, sink=sink)


def run_jump(model, profile, controller_config, sim_config=None, state0=None,
             foot_frames=("left_foot", "right_foot")):
    """Simulate pre-roll, launch, flight and landing; returns a :class:`JumpResult`.

    Lift-off and touchdown for the summary are detected at physics-step
    resolution from the simulated contact force, independently of the
    controller's (tick-rate) phase machine.
    """
    cfg = sim_config or SimConfig()
    cc = controller_config
    if abs(cc.period - cfg.control_period) > 1e-12:
        raise ValueError("controller period and sim control period differ")
    state0 = state0 or initial_state(model, cfg.contact)
    world = World(model, state0, cfg)
    if cc.mode == "velocity":
        world.preload_servo()
    ctrl = JumpController(model, profile, cc)
    foot_pose = TreeKinematics(model, world.state).frame_pose(foot_frames[0])
    foot_start = None
    log = JumpLog(model.joint_names, foot_frames)
    Ts, nsub, dt = cfg.control_period, cfg.substeps, cfg.dt
    k_settle = int(round(cfg.settle_time / Ts))
    k_end = int(math.floor(cfg.duration / Ts + 1e-9))
    tracker = _SummaryTracker(model, profile, foot_frames)
    status, fault, failed_qp = "ok", None, None
    k = -k_settle
    while k <= k_end:
        t = k * Ts
        meas = measure(world, foot_frames[0], foot_pose, world.report)
        if k == 0:
            foot_start = [meas.kin.frame_pose(f)[0] for f in foot_frames]
        try:
            out = ctrl.tick(meas, t)
        except ControllerFault as exc:
            status, fault, failed_qp = "controller_fault", str(exc), exc.problem
            break
        cs = ctrl.state
        if t >= 0.0:
            log.append(_log_row(model, meas, out, world, ctrl, profile, t, foot_frames))
            tracker.update(t, meas, out, world, cs, foot_start)
        command = (out.mode, out.command, out.velocity_ref)
        if cs.phase == LANDING and t - cs.t_phase >= cfg.post_landing - 1e-12:
            break
        try:
            for j in range(nsub):
                prev = world.state
                rep = world.step(*command)
                if t >= 0.0:
                    tracker.contact_event(t + j * dt, prev, rep.total_normal_force, dt, cc)
        except SimFault as exc:
            status, fault = "sim_fault", str(exc)
            break
        k += 1
    summary = tracker.finish(status, fault, world)
    return JumpResult(log, summary, summary["status"], summary["fault"], failed_qp)


def _log_row(model, meas, out, world, ctrl, profile, t, foot_frames):
    cs = ctrl.state
    x_des, xd_des, _ = com_targets(cs, profile, t)
    row = [t, PHASE_CODES[cs.phase], *meas.com, *meas.com_vel, meas.com_estimate[0], meas.com_estimate[2],
           x_des[2], xd_des[2]]
    for j in range(model.n):
        row += [meas.state.s[j], meas.state.sdot[j], out.command[j], world.tau[j]]
    for f in foot_frames:
        row += list(meas.foot_wrenches.get(f, np.zeros(6)))
    row += list(meas.momentum) + [pitch_of(meas.state.rotation), _feet_height(meas.kin, world),
                                  meas.total_normal_force, out.task_residual, out.contact_violation]
    return row


def _feet_height(kin, world):
    lowest = min(kin.p[b][2] + (kin.R[b] @ local)[2] for b, _, local in world.geometry)
    return lowest - world.config.contact.ground


class _SummaryTracker:
    def __init__(self, model, profile, foot_frames):
        self.model = model
        self.profile = profile
        self.foot_frames = foot_frames
        self.peak_speed = np.zeros(model.n)
        self.peak_tau = np.zeros(model.n)
        self.feet_drift = 0.0
        self.max_residual = 0.0
        self.max_violation = 0.0
        self.impulse = 0.0
        self.liftoff = None  # (t, vz, com_z, pitch, |H_w|)
        self.touchdown = None
        self.flight_max_com = -np.inf
        self.flight_max_feet = -np.inf
        self.flight_pitch = 0.0
        self.impact = 0.0

    def contact_event(self, t, state, normal_force, dt, cc):
        """Called every physics step with the state the contact force was evaluated at."""
        if self.liftoff is None:
            if normal_force < cc.takeoff_force:
                kin = TreeKinematics(self.model, state)
                H = kin.centroidal_momentum_matrix() @ state.nu
                self.liftoff = (t, float(H[2] / self.model.total_mass), float(kin.com_position()[2]),
                                pitch_of(state.rotation), float(np.linalg.norm(H[3:])))
            else:
                self.impulse += normal_force * dt
        elif self.touchdown is None:
            if t - self.liftoff[0] >= cc.touchdown_arming and normal_force > cc.touchdown_force:
                self.touchdown = t
        if self.touchdown is not None:
            self.impact = max(self.impact, normal_force)

    def update(self, t, meas, out, world, cs, foot_start):
        st = meas.state
        self.peak_speed = np.maximum(self.peak_speed, np.abs(st.sdot))
        self.peak_tau = np.maximum(self.peak_tau, np.abs(world.tau))
        self.max_residual = max(self.max_residual, out.task_residual)
        self.max_violation = max(self.max_violation, out.contact_violation)
        if self.liftoff is None:
            for f, p0 in zip(self.foot_frames, foot_start):
                self.feet_drift = max(self.feet_drift, float(np.linalg.norm(meas.kin.frame_pose(f)[0] - p0)))
        elif self.touchdown is None:
            self.flight_max_com = max(self.flight_max_com, float(meas.com[2]))
            self.flight_max_feet = max(self.flight_max_feet, _feet_height(meas.kin, world))
            self.flight_pitch = max(self.flight_pitch, abs(pitch_of(st.rotation) - self.liftoff[3]))

    def finish(self, status, fault, world):
        g = -world.gravity[2]
        m = self.model.total_mass
        out = {
            "status": status,
            "fault": fault,
            "desired_takeoff_speed": self.profile.takeoff_speed,
            "planned_takeoff_time": self.profile.duration,
            "takeoff_time": None,
            "takeoff_speed": None,
            "takeoff_angular_momentum": None,
            "flight_com_rise": None,
            "peak_feet_height": None,
            "base_pitch_excursion_deg": None,
            "flight_time": None,
            "predicted_flight_time": None,
            "predicted_apex_rise": None,
            "landing_impact_force": None,
            "launch_impulse": self.impulse,
            "expected_launch_impulse": None,
            "feet_drift_launch": self.feet_drift,
            "peak_joint_speed": dict(zip(self.model.joint_names, self.peak_speed.tolist())),
            "peak_joint_torque": dict(zip(self.model.joint_names, self.peak_tau.tolist())),
            "max_task_residual": self.max_residual,
            "max_contact_violation": self.max_violation,
        }
        if self.liftoff is None:
            if status == "ok":
                out["status"] = "no_takeoff"
                out["fault"] = "contact force never dropped below the take-off threshold"
            return _plain_summary(out)
        t_lo, v, z_lo, _, hw = self.liftoff
        out.update(
            takeoff_time=t_lo,
            takeoff_speed=v,
            takeoff_angular_momentum=hw,
            predicted_flight_time=2.0 * v / g,
            predicted_apex_rise=v * v / (2.0 * g),
            expected_launch_impulse=m * (v + g * t_lo),
        )
        if self.flight_max_com > -np.inf:
            out.update(
                flight_com_rise=self.flight_max_com - z_lo,
                peak_feet_height=self.flight_max_feet,
                base_pitch_excursion_deg=math.degrees(self.flight_pitch),
            )
        if self.touchdown is not None:
            out["flight_time"] = self.touchdown - t_lo
            out["landing_impact_force"] = self.impact
        return _plain_summary(out)


def _plain_summary(out):
    """Summary in field order with numpy scalars turned into plain floats."""
    def plain(v):
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        if isinstance(v, (np.floating, np.integer)):
            return float(v)
        return v
    return {k: plain(out[k]) for k in SUMMARY_FIELDS}
