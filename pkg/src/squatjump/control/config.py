"""Controller gains and settings (JSON-serializable)."""

from dataclasses import asdict, dataclass, field, fields

import numpy as np


@dataclass
class GainSet:
    """Feedback gains and cost weights.

    None of these values come from measured robot data; they are defaults
    tuned for the built-in sagittal model.
    """

    K_com: float = 5.0  # CoM position feedback, velocity mode [1/s]
    Kp_com: float = 100.0  # CoM PD, torque mode [1/s^2]
    Kd_com: float = 20.0  # [1/s]
    K_H: float = 100.0  # angular momentum regulation [1/s]
    Kp_post: float = 25.0
    Kd_post: float = 10.0
    Lambda: float = 1.0  # postural weight (scalar or per-joint list)
    Delta: float = 10.0  # continuity weight (scalar or per-joint list)
    wrench_regularization: float = 1e-6  # torque mode: 1/2 w |f|^2

    def __post_init__(self):
        for name in ("K_com", "Kp_com", "Kd_com", "Kp_post", "Kd_post"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"gain {name} must be positive")
        if self.K_H < 0.0:
            raise ValueError("K_H must be non-negative")
        if np.any(np.asarray(self.Lambda) <= 0.0) or np.any(np.asarray(self.Delta) <= 0.0):
            raise ValueError("Lambda and Delta must have positive diagonal entries")

    def weights(self, n):
        lam = np.broadcast_to(np.asarray(self.Lambda, dtype=float), (n,)).copy()
        dlt = np.broadcast_to(np.asarray(self.Delta, dtype=float), (n,)).copy()
        return lam, dlt


@dataclass
class ControllerConfig:
    mode: str = "velocity"  # "velocity" | "torque"
    gains: GainSet = field(default_factory=GainSet)
    period: float = 0.0025
    disable_momentum_constraint: bool = False
    friction: float = 0.8
    min_normal_force: float = 1.0  # per foot, torque mode
    takeoff_force: float = 2.0
    touchdown_force: float = 10.0
    touchdown_arming: float = 0.02
    takeoff_guard: float = 0.05
    aerial_duration: float = 0.15
    # after the take-off time: "hold" the joint pose or keep "track"ing the QP;
    # "auto" tracks in velocity mode and holds in torque mode, where a target
    # deceleration above g would need the ground to pull on the feet
    release: str = "auto"
    release_deceleration: float = 8.0  # "track": vertical CoM target deceleration, in units of g
    landing_retraction: tuple = (0.04, 0.08, 0.04)  # added to the take-off joint pose
    landing_pose: tuple = None  # absolute landing joint pose; overrides the retraction
    qp_dump_dir: str = None

    def __post_init__(self):
        if isinstance(self.gains, dict):
            self.gains = GainSet(**self.gains)
        if self.mode not in ("velocity", "torque"):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if self.release not in ("auto", "hold", "track"):
            raise ValueError(f"unknown release mode {self.release!r}")
        if not self.period > 0.0:
            raise ValueError("control period must be positive")
        if self.friction < 0.0 or self.min_normal_force < 0.0:
            raise ValueError("friction and minimum normal force must be non-negative")

    @property
    def release_mode(self):
        if self.release == "auto":
            return "track" if self.mode == "velocity" else "hold"
        return self.release

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown controller settings: {sorted(unknown)}")
        d = dict(d)
        if "gains" in d:
            g = dict(d["gains"])
            gk = {f.name for f in fields(GainSet)}
            bad = set(g) - gk
            if bad:
                raise ValueError(f"unknown gains: {sorted(bad)}")
            d["gains"] = GainSet(**g)
        for key in ("landing_retraction", "landing_pose"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        for key in ("landing_retraction", "landing_pose"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out
