"""Vertical CoM launch profiles and minimum-jerk joint segments."""

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class JumpParams:
    """Jump height above take-off, launch CoM displacement, gravity magnitude."""

    height: float
    displacement: float
    gravity: float = 9.81

    def __post_init__(self):
        if not (self.height > 0.0 and self.displacement > 0.0 and self.gravity > 0.0):
            raise ValueError("jump height, displacement and gravity must all be positive")


def takeoff_speed(params):
    """Vertical CoM speed needed to rise ``params.height`` ballistically."""
    return math.sqrt(2.0 * params.gravity * params.height)


class SmoothstepCurve:
    """Normalized launch velocity ``v(u) = u^2 (3 - 2u)`` on ``u in [0, 1]``.

    Zero velocity and acceleration at the start, unit velocity at the end.
    """

    def velocity(self, u):
        return u * u * (3.0 - 2.0 * u)

    def acceleration(self, u):
        return 6.0 * u * (1.0 - u)

    def displacement(self, u):
        return u ** 3 - 0.5 * u ** 4

    @property
    def unit_displacement(self):
        return 0.5

    @property
    def final_slope(self):
        return 0.0


class HermiteCurve:
    """Cubic ``v(u)`` with ``v(0)=v'(0)=0``, ``v(1)=1`` and ``v'(1)=slope``.

    ``slope=0`` reduces to the smoothstep. A positive slope shortens the
    unit displacement (``1/2 - slope/12``), a negative one makes the
    end acceleration negative, which the final-acceleration timing needs.
    """

    def __init__(self, slope):
        self.slope = float(slope)
        self._a = 3.0 - self.slope
        self._b = self.slope - 2.0
        if self.unit_displacement <= 0.0:
            raise ValueError("curve slope gives a non-positive unit displacement")

    @classmethod
    def with_unit_displacement(cls, d_hat):
        return cls(12.0 * (0.5 - d_hat))

    def velocity(self, u):
        return self._a * u * u + self._b * u ** 3

    def acceleration(self, u):
        return 2.0 * self._a * u + 3.0 * self._b * u * u

    def displacement(self, u):
        return self._a * u ** 3 / 3.0 + self._b * u ** 4 / 4.0

    @property
    def unit_displacement(self):
        return self._a / 3.0 + self._b / 4.0

    @property
    def final_slope(self):
        return self.slope


class LaunchProfile:
    """Desired vertical CoM motion relative to the squat start.

    ``evaluate(t)`` returns ``(z, zdot, zddot)`` with ``z(0) = 0``. Before
    ``t = 0`` the profile holds its start; past the take-off time ``T`` it
    continues ballistically from the take-off state.
    """

    def __init__(self, duration, takeoff_speed, curve=None, gravity=9.81):
        if duration <= 0.0:
            raise ValueError("launch duration must be positive")
        self.duration = float(duration)
        self.takeoff_speed = float(takeoff_speed)
        self.curve = curve or SmoothstepCurve()
        self.gravity = gravity

    @property
    def displacement(self):
        return self.takeoff_speed * self.duration * self.curve.unit_displacement

    def evaluate(self, t):
        T, v = self.duration, self.takeoff_speed
        if t <= 0.0:
            return 0.0, 0.0, 0.0
        if t <= T:
            u = t / T
            return v * T * self.curve.displacement(u), v * self.curve.velocity(u), v * self.curve.acceleration(u) / T
        dt = t - T
        z_end = self.displacement
        g = self.gravity
        return z_end + v * dt - 0.5 * g * dt * dt, v - g * dt, -g

    def sample(self, dt):
        """Samples every ``dt`` over the launch, always ending exactly at the take-off time."""
        n = int(math.floor(self.duration / dt + 1e-9))
        ts = np.arange(n + 1) * dt
        if self.duration - ts[-1] > 1e-9 * dt:
            ts = np.append(ts, self.duration)
        return ts, np.array([self.evaluate(t) for t in ts])

    def to_csv(self, path, dt=1e-3):
        """Write sampled ``t, z_d, zdot_d, zddot_d`` rows to a path or an open text stream."""
        if hasattr(path, "write"):
            self._write_csv(path, dt)
            return
        with open(path, "w", newline="") as fh:
            self._write_csv(fh, dt)

    def _write_csv(self, fh, dt):
        ts, vals = self.sample(dt)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "z_d", "zdot_d", "zddot_d"])
        for t, (z, zd, zdd) in zip(ts, vals):
            w.writerow([f"{t:.10g}", f"{z:.10g}", f"{zd:.10g}", f"{zdd:.10g}"])


def launch_profile(params, curve=None, mode="displacement"):
    """Scale a normalized curve to the jump parameters.

    ``mode="displacement"`` picks the duration so the CoM rises by
    ``params.displacement``; ``mode="final_acceleration"`` picks it so the
    take-off acceleration equals ``-g`` (needs a curve with negative final
    slope); the displacement then follows from the duration.
    """
    curve = curve or SmoothstepCurve()
    v = takeoff_speed(params)
    if mode == "displacement":
        T = params.displacement / (v * curve.unit_displacement)
    elif mode == "final_acceleration":
        if curve.final_slope >= 0.0:
            raise ValueError("final-acceleration timing needs a curve whose end slope is negative")
        T = -v * curve.final_slope / params.gravity
    else:
        raise ValueError(f"unknown timing mode {mode!r}")
    return LaunchProfile(T, v, curve, params.gravity)


@dataclass
class MinJerkSegment:
    start: np.ndarray
    end: np.ndarray
    duration: float

    def __post_init__(self):
        self.start = np.atleast_1d(np.asarray(self.start, dtype=float))
        self.end = np.atleast_1d(np.asarray(self.end, dtype=float))
        if self.start.shape != self.end.shape:
            raise ValueError("segment endpoints must have equal dimensions")
        if not self.duration > 0.0:
            raise ValueError("segment duration must be positive")


def min_jerk_eval(seg, t):
    """Position, velocity and acceleration of the quintic min-jerk blend.

    Times outside ``[0, duration]`` are clamped to the nearest endpoint.
    """
    T = seg.duration
    u = min(max(t / T, 0.0), 1.0)
    d = seg.end - seg.start
    s = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    sd = 30.0 * u * u * (1.0 - u) ** 2 / T
    sdd = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (T * T)
    return seg.start + d * s, d * sd, d * sdd
