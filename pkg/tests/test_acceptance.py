"""Acceptance criteria; each test prints one PASS/FAIL line in the session summary."""

import math
import time

import numpy as np
import pytest
from dyn_oracle import flight_momentum_rate, jacobian_errors, mass_matrix_error, random_state
from qp_oracle import enumerate_optimum, enumeration_size, random_problem

from squatjump.multibody import icub_sagittal
from squatjump.qpsolver import SOLVED, QpProblem, solve
from squatjump.trajgen import JumpParams, MinJerkSegment, launch_profile, min_jerk_eval, takeoff_speed

G = 9.81


@pytest.mark.criterion(1, "take-off speed law")
def test_criterion_1_takeoff_speed_law():
    v = takeoff_speed(JumpParams(0.04, 0.11, G))
    assert abs(v - math.sqrt(2 * G * 0.04)) < 1e-12
    assert round(v, 3) == 0.886


@pytest.mark.criterion(2, "dynamics oracle suite")
def test_criterion_2_dynamics_oracles():
    model = icub_sagittal()
    frames = [f.name for f in model.frames]
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = np.zeros(3)
    for _ in range(1000):
        st = random_state(model, rng)
        dHw, _ = flight_momentum_rate(model, st)
        worst = np.maximum(worst, [mass_matrix_error(model, st), jacobian_errors(model, st, frames), dHw])
    elapsed = time.perf_counter() - t0
    print(f"mass matrix {worst[0]:.2e}, jacobians {worst[1]:.2e}, dH_w/dt {worst[2]:.2e}, {elapsed:.1f} s")
    assert worst[0] < 1e-9 and worst[1] < 1e-5 and worst[2] < 1e-6
    assert elapsed < 30.0


@pytest.mark.criterion(3, "QP oracle suite")
def test_criterion_3_qp_oracle():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    sizes = [(8, 12)] * 10
    while len(sizes) < 500:
        m, c = int(rng.integers(1, 9)), int(rng.integers(0, 13))
        if enumeration_size(m, c) <= 20000:
            sizes.append((m, c))
    worst_obj = worst_kkt = 0.0
    for m, c in sizes:
        n_eq = int(rng.integers(0, min(m, c) + 1)) if c else 0
        H, g, A, lb, ub = random_problem(rng, m, c, n_eq)
        sol = solve(QpProblem(H, g, A, lb, ub))
        assert sol.status == SOLVED
        _, f_ref = enumerate_optimum(H, g, A, lb, ub)
        worst_obj = max(worst_obj, abs(sol.objective - f_ref) / max(1.0, abs(f_ref)))
        worst_kkt = max(worst_kkt, sol.kkt.worst())
    elapsed = time.perf_counter() - t0
    print(f"objective {worst_obj:.2e}, KKT {worst_kkt:.2e}, {elapsed:.1f} s")
    assert worst_obj < 1e-8 and worst_kkt < 1e-8
    assert elapsed < 60.0


@pytest.mark.criterion(4, "velocity jump")
def test_criterion_4_velocity_jump(bundled_runs):
    rec = bundled_runs["velocity_jump_4cm"]
    s = rec["summary"]
    print({k: s[k] for k in ("takeoff_speed", "flight_com_rise", "feet_drift_launch", "takeoff_angular_momentum")})
    assert s["status"] == "ok"
    assert abs(s["takeoff_speed"] - 0.886) <= 0.05 * 0.886
    assert 0.028 <= s["flight_com_rise"] <= 0.040
    assert s["feet_drift_launch"] < 0.002
    assert s["takeoff_angular_momentum"] < 0.02
    assert max(rec["seconds"]) < 60.0


@pytest.mark.criterion(5, "torque jump")
def test_criterion_5_torque_jump(bundled_runs):
    rec = bundled_runs["torque_jump_4cm"]
    s = rec["summary"]
    print({k: s[k] for k in ("takeoff_speed", "flight_com_rise", "max_contact_violation")})
    assert s["status"] == "ok" and s["takeoff_time"] is not None
    assert s["flight_com_rise"] > 0.01
    assert s["max_contact_violation"] <= 1e-6
    assert max(rec["seconds"]) < 120.0


@pytest.mark.criterion(6, "momentum ablation")
def test_criterion_6_momentum_ablation(bundled_runs):
    runs = bundled_runs["ablation_momentum"]["summary"]["runs"]
    on = runs["constrained"]["base_pitch_excursion_deg"]
    off = runs["unconstrained"]["base_pitch_excursion_deg"]
    print(f"pitch excursion constrained {on:.3f} deg, unconstrained {off:.3f} deg")
    assert runs["constrained"]["status"] == runs["unconstrained"]["status"] == "ok"
    assert on < off
    assert on < 5.0


@pytest.mark.criterion(7, "ballistic consistency")
def test_criterion_7_ballistic(bundled_runs):
    for name in ("velocity_jump_4cm", "torque_jump_4cm"):
        s = bundled_runs[name]["summary"]
        v = s["takeoff_speed"]
        print(f"{name}: flight {s['flight_time']:.4f} s vs {2 * v / G:.4f} s, "
              f"rise {s['flight_com_rise']:.4f} m vs {v * v / (2 * G):.4f} m")
        assert abs(s["flight_time"] - 2 * v / G) <= 0.1 * 2 * v / G
        assert abs(s["flight_com_rise"] - v * v / (2 * G)) <= 0.1 * v * v / (2 * G)


@pytest.mark.criterion(8, "trajectory generator")
def test_criterion_8_trajectory_generator():
    rng = np.random.default_rng(8)
    for h, d in zip(rng.uniform(0.005, 0.3, 200), rng.uniform(0.02, 0.3, 200)):
        params = JumpParams(h, d, G)
        prof = launch_profile(params)
        T = prof.duration
        z0, zd0, zdd0 = prof.evaluate(0.0)
        zT, zdT, _ = prof.evaluate(T)
        assert max(abs(z0), abs(zd0), abs(zdd0)) < 1e-10
        assert abs(zT - d) < 1e-10 and abs(zdT - math.sqrt(2 * G * h)) < 1e-10
    for _ in range(200):
        seg = MinJerkSegment(rng.normal(size=3), rng.normal(size=3), rng.uniform(0.05, 2.0))
        _, qd0, qdd0 = min_jerk_eval(seg, 0.0)
        _, qd1, qdd1 = min_jerk_eval(seg, seg.duration)
        assert np.abs(np.concatenate([qd0, qdd0, qd1, qdd1])).max() < 1e-12


@pytest.mark.criterion(9, "determinism")
def test_criterion_9_determinism(bundled_runs):
    for name, rec in bundled_runs.items():
        first, second = rec["dirs"]
        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert {"log.csv", "profile.csv", "summary.json"} <= {p.name for p in files}
        for rel in files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), f"{name}/{rel}"
