"""Jump phase machine and the stateful controller wrapping the launch QPs."""

import os
from dataclasses import dataclass, field

import numpy as np

from ..qpsolver import ActiveSetSolver, dump_problem
from ..trajgen import MinJerkSegment, min_jerk_eval
from .config import ControllerConfig
from .tasks import ControlOutput, ControllerFault, torque_tick, velocity_tick

LAUNCH, AERIAL, LANDING = "launch", "aerial", "landing"
PHASE_CODES = {LAUNCH: 0, AERIAL: 1, LANDING: 2}


@dataclass
class ControllerState:
    s_d: np.ndarray
    com_ref: np.ndarray
    prev_command: np.ndarray
    period: float
    foot_frames: tuple = ("left_foot", "right_foot")
    H_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phase: str = LAUNCH
    t_phase: float = None  # time of entering the current phase
    t_liftoff: float = None  # first tick after launch start with the feet unloaded
    segment: MinJerkSegment = None
    s_land: np.ndarray = None
    s_hold: np.ndarray = None  # joint pose held between the end of the profile and lift-off
    active_set: list = field(default_factory=list)
    prev_solution: np.ndarray = None

    def __post_init__(self):
        if not self.period > 0.0:
            raise ValueError("control period must be positive")

    def accumulate_momentum(self, meas, t, dt):
        # forward-Euler integral of the measured angular momentum, reset at launch start
        if t <= 0.0:
            self.H_integral = np.zeros(3)
        else:
            self.H_integral = self.H_integral + meas.momentum[3:] * dt


def phase_step(cstate, total_normal_force, t, config, takeoff_time):
    """Advance the phase machine; returns ``(new_phase, changed)``.

    Launch ends when the feet unload or ``takeoff_guard`` seconds after
    the planned take-off. Touchdown is armed only once the feet have been
    unloaded and ``touchdown_arming`` seconds have passed since then.
    """
    phase = cstate.phase
    if phase == LAUNCH:
        if t < 0.0:
            return phase, False
        unloaded = total_normal_force < config.takeoff_force
        if unloaded and cstate.t_liftoff is None:
            cstate.t_liftoff = t
        if unloaded or t > takeoff_time + config.takeoff_guard + 1e-12:
            cstate.phase, cstate.t_phase = AERIAL, t
            return AERIAL, True
        return phase, False
    if phase == AERIAL:
        if cstate.t_liftoff is None:
            if total_normal_force < config.takeoff_force:
                cstate.t_liftoff = t
            return phase, False
        armed = t - cstate.t_liftoff >= config.touchdown_arming - 1e-12
        if armed and total_normal_force > config.touchdown_force:
            cstate.phase, cstate.t_phase = LANDING, t
            return LANDING, True
    return phase, False


def aerial_tick(cstate, t):
    """Position command along the retraction segment (held at its end)."""
    q, qd, _ = min_jerk_eval(cstate.segment, t - cstate.t_phase)
    return ControlOutput("position", q, velocity_ref=qd)


class JumpController:
    """Launch QP + aerial retraction + landing hold for one robot.

    ``tick(meas, t)`` is called once per control period with the current
    measurement; ``t`` is the launch clock (negative during the pre-roll).
    """

    def __init__(self, model, profile, config=None, solver=None):
        self.model = model
        self.profile = profile
        self.config = config or ControllerConfig()
        self.solver = solver or ActiveSetSolver()
        self.state = None

    def reset(self, meas):
        n = self.model.n
        cfg = self.config
        prev = np.zeros(n)
        if cfg.mode == "torque":
            prev = meas.kin.bias_forces()[6:]
        self.state = ControllerState(
            s_d=meas.state.s.copy(),
            com_ref=meas.com_estimate.copy(),
            prev_command=prev,
            period=cfg.period,
        )

    def landing_pose(self, s_takeoff):
        cfg = self.config
        if cfg.landing_pose is not None:
            target = np.asarray(cfg.landing_pose, dtype=float)
        else:
            target = s_takeoff + np.asarray(cfg.landing_retraction, dtype=float)
        pos, _, _ = self.model.joint_limits()
        return np.clip(target, pos[0], pos[1])

    def tick(self, meas, t):
        if self.state is None:
            self.reset(meas)
        cs = self.state
        cfg = self.config
        _, changed = phase_step(cs, meas.total_normal_force, t, cfg, self.profile.duration)
        if changed and cs.phase == AERIAL:
            cs.s_land = self.landing_pose(meas.state.s)
            cs.segment = MinJerkSegment(meas.state.s.copy(), cs.s_land, cfg.aerial_duration)
        if cs.phase == LAUNCH and cfg.release_mode == "hold" and t > self.profile.duration + 1e-12:
            # launch profile finished: stop the legs and let the body's momentum lift the feet
            if cs.s_hold is None:
                cs.s_hold = meas.state.s.copy()
            return ControlOutput("position", cs.s_hold.copy(), velocity_ref=np.zeros(self.model.n))
        if cs.phase == LAUNCH:
            try:
                if cfg.mode == "velocity":
                    return velocity_tick(self.model, meas, self.profile, t, cfg.gains, cs, cfg, self.solver)
                return torque_tick(self.model, meas, self.profile, t, cfg.gains, cs, cfg, self.solver)
            except ControllerFault as exc:
                if cfg.qp_dump_dir and exc.problem is not None:
                    os.makedirs(cfg.qp_dump_dir, exist_ok=True)
                    dump_problem(exc.problem, os.path.join(cfg.qp_dump_dir, "failed_qp.txt"))
                raise
        if cs.phase == AERIAL:
            return aerial_tick(cs, t)
        return ControlOutput("position", cs.s_land.copy(), velocity_ref=np.zeros(self.model.n))
