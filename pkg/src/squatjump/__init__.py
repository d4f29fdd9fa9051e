"""Squat-jump control for floating-base humanoids.

Subpackages: ``multibody`` (kinematics/dynamics), ``qpsolver`` (dense
active-set QP), ``trajgen`` (launch profiles, min-jerk), ``control``
(launch QPs and phase machine), ``sim`` (penalty-contact simulator) and
``harness`` (scenarios and the ``jump`` CLI).
"""

__version__ = "0.1.0"
