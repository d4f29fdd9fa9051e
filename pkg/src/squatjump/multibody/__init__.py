from .dynamics import (
    GRAVITY,
    CentroidalMomentum,
    TreeKinematics,
    Wrench,
    bias_forces,
    centroidal_momentum,
    centroidal_momentum_matrix,
    com_jacobian,
    com_position,
    forward_dynamics,
    frame_bias_acceleration,
    frame_jacobian,
    frame_pose,
    inverse_dynamics,
    mass_matrix,
)
from .model import (
    ContactPoint,
    Frame,
    Joint,
    Link,
    ModelError,
    RobotModel,
    RobotState,
    StateMismatchError,
    UnknownFrameError,
)
from .robots import default_squat, icub_sagittal, place_on_ground, squat_configuration

__all__ = [
    "GRAVITY", "CentroidalMomentum", "TreeKinematics", "Wrench", "bias_forces", "centroidal_momentum",
    "centroidal_momentum_matrix", "com_jacobian", "com_position", "forward_dynamics",
    "frame_bias_acceleration", "frame_jacobian", "frame_pose", "inverse_dynamics", "mass_matrix",
    "ContactPoint", "Frame", "Joint", "Link", "ModelError", "RobotModel", "RobotState",
    "StateMismatchError", "UnknownFrameError", "default_squat", "icub_sagittal", "place_on_ground",
    "squat_configuration",
]
