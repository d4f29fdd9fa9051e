import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from squatjump.trajgen import (
    HermiteCurve,
    JumpParams,
    LaunchProfile,
    MinJerkSegment,
    SmoothstepCurve,
    launch_profile,
    min_jerk_eval,
    takeoff_speed,
)


def check_profile(prof, params, tol=1e-10):
    T, v = prof.duration, prof.takeoff_speed
    z0, zd0, zdd0 = prof.evaluate(0.0)
    zT, zdT, _ = prof.evaluate(T)
    assert abs(z0) < tol and abs(zd0) < tol and abs(zdd0) < tol
    assert abs(zdT - v) < tol
    assert abs(zT - params.displacement) < tol
    assert abs(v - math.sqrt(2.0 * params.gravity * params.height)) < 1e-12


def test_takeoff_speed_law():
    v = takeoff_speed(JumpParams(0.04, 0.11))
    assert abs(v - math.sqrt(2 * 9.81 * 0.04)) < 1e-12
    assert round(v, 3) == 0.886
    # apex recovered from the speed
    assert abs(v * v / (2 * 9.81) - 0.04) < 1e-12 * 0.04


@settings(max_examples=80, deadline=None)
@given(h=hst.floats(0.005, 0.3), d=hst.floats(0.02, 0.3))
def test_profile_invariants(h, d):
    params = JumpParams(h, d)
    prof = launch_profile(params)
    check_profile(prof, params)
    ts = np.linspace(0.0, prof.duration, 200)
    zs = np.array([prof.evaluate(t) for t in ts])
    assert np.all(np.diff(zs[:, 0]) > 0.0)
    assert np.all(zs[:, 1] >= -1e-15)


def test_profile_derivatives_consistent():
    prof = launch_profile(JumpParams(0.04, 0.11))
    eps = 1e-6
    for t in np.linspace(0.01, prof.duration - 0.01, 17):
        zp, zdp, _ = prof.evaluate(t + eps)
        zm, zdm, _ = prof.evaluate(t - eps)
        _, zd, zdd = prof.evaluate(t)
        assert (zp - zm) / (2 * eps) == pytest.approx(zd, abs=1e-7)
        assert (zdp - zdm) / (2 * eps) == pytest.approx(zdd, abs=1e-6)


def test_default_duration_and_ballistic_tail():
    prof = launch_profile(JumpParams(0.04, 0.11))
    # smoothstep unit displacement is 1/2, so T = 2 d / v
    assert prof.duration == pytest.approx(2 * 0.11 / takeoff_speed(JumpParams(0.04, 0.11)), rel=1e-12)
    z, zd, zdd = prof.evaluate(prof.duration + 0.1)
    assert zdd == -9.81
    assert zd == pytest.approx(prof.takeoff_speed - 0.981)
    assert prof.evaluate(-1.0) == (0.0, 0.0, 0.0)


def test_hermite_curve_reaches_longer_launch():
    params = JumpParams(0.04, 0.11)
    prof = launch_profile(params, HermiteCurve.with_unit_displacement(0.287))
    check_profile(prof, params)
    assert prof.duration == pytest.approx(0.4326, abs=1e-3)
    assert HermiteCurve(0.0).unit_displacement == pytest.approx(SmoothstepCurve().unit_displacement)


def test_final_acceleration_timing():
    params = JumpParams(0.04, 0.11)
    prof = launch_profile(params, HermiteCurve(-1.0), mode="final_acceleration")
    _, _, zdd = prof.evaluate(prof.duration)
    assert zdd == pytest.approx(-params.gravity, rel=1e-12)
    with pytest.raises(ValueError):
        launch_profile(params, SmoothstepCurve(), mode="final_acceleration")
    with pytest.raises(ValueError):
        launch_profile(params, mode="sideways")


@pytest.mark.parametrize("args", [(0.0, 0.1), (0.04, -0.1), (0.04, 0.1, 0.0)])
def test_bad_params(args):
    with pytest.raises(ValueError):
        JumpParams(*args)


def test_bad_curve_and_duration():
    with pytest.raises(ValueError):
        HermiteCurve(6.0)
    with pytest.raises(ValueError):
        LaunchProfile(0.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(seed=hst.integers(0, 2 ** 31), T=hst.floats(0.05, 2.0))
def test_min_jerk_endpoints(seed, T):
    rng = np.random.default_rng(seed)
    seg = MinJerkSegment(rng.normal(size=3), rng.normal(size=3), T)
    q0, qd0, qdd0 = min_jerk_eval(seg, 0.0)
    q1, qd1, qdd1 = min_jerk_eval(seg, T)
    assert np.abs(q0 - seg.start).max() < 1e-12 and np.abs(q1 - seg.end).max() < 1e-12
    assert np.abs(np.concatenate([qd0, qdd0, qd1, qdd1])).max() < 1e-12
    # clamped outside the segment
    assert np.array_equal(min_jerk_eval(seg, T + 1.0)[0], q1)


def test_min_jerk_peak_speed():
    seg = MinJerkSegment([0.0], [1.0], 2.0)
    _, qd, qdd = min_jerk_eval(seg, 1.0)
    assert qd[0] == pytest.approx(15.0 / 8.0 / 2.0)
    assert qdd[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        MinJerkSegment([0.0, 1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        MinJerkSegment([0.0], [1.0], 0.0)


def test_profile_csv_ends_at_takeoff():
    prof = launch_profile(JumpParams(0.04, 0.11))
    buf = io.StringIO()
    prof.to_csv(buf, dt=1e-3)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,z_d,zdot_d,zddot_d"
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == pytest.approx(prof.duration, abs=1e-9)
    assert last[1] == pytest.approx(0.11, abs=1e-9)
    assert len(lines) == 1 + int(prof.duration / 1e-3) + 2
