from .config import ControllerConfig, GainSet
from .controller import (
    AERIAL,
    LANDING,
    LAUNCH,
    PHASE_CODES,
    ControllerState,
    JumpController,
    aerial_tick,
    phase_step,
)
from .tasks import (
    ControllerFault,
    ControlOutput,
    build_torque_qp,
    build_velocity_qp,
    contact_rows,
    torque_tick,
    velocity_tick,
)

__all__ = [
    "ControllerConfig", "GainSet", "AERIAL", "LANDING", "LAUNCH", "PHASE_CODES", "ControllerState",
    "JumpController", "aerial_tick", "phase_step", "ControllerFault", "ControlOutput", "build_torque_qp",
    "build_velocity_qp", "contact_rows", "torque_tick", "velocity_tick",
]
