"""Scenario files, experiment runs, parameter sweeps and pass/fail checks.

A scenario is a JSON document::

    {
      "name": "velocity_jump_4cm",
      "model": "../models/icub_sagittal.json",
      "jump": {"height": 0.04, "displacement": 0.11},
      "controller": {"mode": "velocity"},
      "sim": {"contact": {"stiffness": 1e6}},
      "runs": {"constrained": {}, "unconstrained": {"controller": {"disable_momentum_constraint": true}}},
      "expectations": [{"field": "takeoff_speed", "min": 0.842, "max": 0.930}],
      "output": "jump_out/velocity_jump_4cm"
    }

``model`` is a path relative to the scenario file (or ``builtin:icub_sagittal``).
``runs`` is optional; each entry is deep-merged over the base scenario and
a scenario without it has one run called ``main``. Runs are independent
and execute in parallel, capped by the ``JUMP_THREADS`` environment variable.
"""

import copy
import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .control import ControllerConfig
from .multibody import RobotModel, icub_sagittal
from .multibody.model import ModelError
from .multibody.robots import squat_configuration
from .sim import SUMMARY_FIELDS, SimConfig, initial_state, run_jump
from .trajgen import HermiteCurve, JumpParams, SmoothstepCurve, launch_profile

EXIT_OK, EXIT_EXPECTATION, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3
SCENARIO_KEYS = {"name", "model", "jump", "controller", "sim", "squat", "feet", "runs", "expectations", "output"}
RUN_KEYS = {"jump", "controller", "sim", "squat", "model"}
CHECKS = ("min", "max", "equals", "rel_to", "rel_tol", "less_than_run")
SWEEP_FIELDS = tuple(f for f in SUMMARY_FIELDS if f not in ("peak_joint_speed", "peak_joint_torque"))
DATA_DIR = Path(__file__).parent / "data"


class ScenarioError(ValueError):
    """Scenario file is unreadable or inconsistent (exit code 2)."""


@dataclass
class RunSpec:
    """Fully resolved settings of one simulation run (picklable)."""

    name: str
    model: dict
    jump: dict
    controller: dict
    sim: dict
    squat: dict = None
    feet: tuple = ("left_foot", "right_foot")


@dataclass
class Scenario:
    name: str
    runs: list
    expectations: list = field(default_factory=list)
    output: str = None
    source: dict = None
    base_dir: Path = None


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(d, dotted, value):
    """Set ``d["a"]["b"] = value`` for ``dotted = "a.b"``, creating levels."""
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ScenarioError(f"grid key {dotted!r} does not name a settings field")
    d[keys[-1]] = value


def bundled_scenarios():
    return sorted((DATA_DIR / "scenarios").glob("*.json"))


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc


def _model_dict(ref, base_dir):
    if ref is None or ref == "builtin:icub_sagittal":
        return icub_sagittal().to_dict()
    path = Path(ref)
    if not path.is_absolute():
        path = base_dir / path
    return load_json(path)


def make_profile(jump):
    """Launch profile from a jump settings dict (height, displacement, gravity, curve, timing)."""
    jp = dict(jump)
    curve = jp.pop("curve", "smoothstep")
    timing = jp.pop("timing", "displacement")
    params = JumpParams(**jp)
    if curve == "smoothstep":
        curve = SmoothstepCurve()
    elif isinstance(curve, dict) and curve.get("type") == "hermite":
        curve = HermiteCurve.with_unit_displacement(float(curve["unit_displacement"]))
    else:
        raise ValueError(f"unknown launch curve {curve!r}")
    return params, launch_profile(params, curve, timing)


def _build(spec):
    """Objects for one run; raises ScenarioError on bad settings."""
    try:
        model = RobotModel.from_dict(spec.model)
        params, profile = make_profile(spec.jump)
        cc = ControllerConfig.from_dict(spec.controller)
        sd = dict(spec.sim)
        sd.setdefault("gravity", [0.0, 0.0, -params.gravity])
        sc = SimConfig.from_dict(sd)
        if abs(sc.gravity[2] + params.gravity) > 1e-12 or sc.gravity[0] or sc.gravity[1]:
            raise ValueError("sim gravity must be (0, 0, -jump.gravity)")
        if "period" not in spec.controller:
            cc.period = sc.control_period
        for f in spec.feet:
            model.frame(f)
    except (TypeError, ValueError, KeyError, ModelError) as exc:
        raise ScenarioError(f"run {spec.name!r}: {exc}") from exc
    if spec.squat:
        knee, pitch = spec.squat.get("knee"), spec.squat.get("torso_pitch", 0.0)

        def squat(m, ground=0.0, sink=0.0):
            return squat_configuration(m, knee, pitch, ground=ground, sink=sink)
    else:
        squat = None
    return model, profile, cc, sc, squat


def parse_scenario(d, base_dir=Path(".")):
    """Validate a scenario dict and resolve its runs."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(d) - SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    if "name" not in d or "jump" not in d:
        raise ScenarioError("scenario needs a name and jump parameters")
    base_dir = Path(base_dir)
    base = {k: d.get(k, {}) for k in ("jump", "controller", "sim")}
    base["squat"] = d.get("squat")
    base["model"] = d.get("model")
    runs_in = d.get("runs") or {"main": {}}
    if not isinstance(runs_in, dict):
        raise ScenarioError("runs must map run names to setting overrides")
    runs = []
    for name, over in runs_in.items():
        bad = set(over) - RUN_KEYS
        if bad:
            raise ScenarioError(f"run {name!r}: unknown keys {sorted(bad)}")
        merged = deep_merge(base, over)
        spec = RunSpec(name, _model_dict(merged["model"], base_dir), merged["jump"], merged["controller"],
                       merged["sim"], merged["squat"], tuple(d.get("feet", ("left_foot", "right_foot"))))
        _build(spec)
        runs.append(spec)
    exps = d.get("expectations", [])
    names = [r.name for r in runs]
    for e in exps:
        _check_expectation(e, names)
    return Scenario(d["name"], runs, exps, d.get("output"), d, base_dir)


def load_scenario(path):
    path = Path(path)
    return parse_scenario(load_json(path), path.parent)


def _check_expectation(e, run_names):
    if not isinstance(e, dict) or "field" not in e:
        raise ScenarioError(f"expectation {e!r} needs a field")
    top = e["field"].split(".")[0]
    if top not in SUMMARY_FIELDS:
        raise ScenarioError(f"expectation field {e['field']!r} is not a summary field")
    if e.get("rel_to") is not None and e["rel_to"] not in SUMMARY_FIELDS:
        raise ScenarioError(f"expectation reference {e['rel_to']!r} is not a summary field")
    bad = set(e) - set(CHECKS) - {"field", "run"}
    if bad:
        raise ScenarioError(f"unknown expectation keys {sorted(bad)}")
    if not any(k in e for k in ("min", "max", "equals", "rel_to", "less_than_run")):
        raise ScenarioError(f"expectation on {e['field']!r} checks nothing")
    if "rel_to" in e and "rel_tol" not in e:
        raise ScenarioError("rel_to needs rel_tol")
    for key in ("run", "less_than_run"):
        if key in e and e[key] not in run_names:
            raise ScenarioError(f"expectation refers to unknown run {e[key]!r}")
    if "run" not in e and len(run_names) > 1:
        raise ScenarioError(f"expectation on {e['field']!r} must name a run")


def _lookup(summary, dotted):
    v = summary
    for k in dotted.split("."):
        if not isinstance(v, dict) or k not in v:
            return None
        v = v[k]
    return v


def evaluate(expectations, summaries):
    """Check expectations against run summaries; returns ``[(passed, line)]``."""
    default = next(iter(summaries))
    out = []
    for e in expectations:
        run = e.get("run", default)
        f = e["field"]
        v = _lookup(summaries[run], f)
        label = f"{run}: {f} = {_short(v)}"
        if v is None or (isinstance(v, float) and not math.isfinite(v)):
            if "equals" in e:
                ok = v == e["equals"]
                out.append((ok, f"{label} == {e['equals']!r}"))
            else:
                out.append((False, f"{label} (not available)"))
            continue
        checks = []
        if "min" in e:
            checks.append((v >= e["min"], f">= {e['min']}"))
        if "max" in e:
            checks.append((v <= e["max"], f"<= {e['max']}"))
        if "equals" in e:
            checks.append((v == e["equals"], f"== {e['equals']!r}"))
        if "rel_to" in e:
            ref = summaries[run].get(e["rel_to"])
            ok = ref is not None and abs(v - ref) <= e["rel_tol"] * abs(ref)
            checks.append((ok, f"within {e['rel_tol']:.0%} of {e['rel_to']} = {_short(ref)}"))
        if "less_than_run" in e:
            other = _lookup(summaries[e["less_than_run"]], f)
            ok = other is not None and v < other
            checks.append((ok, f"< {e['less_than_run']}: {_short(other)}"))
        out.append((all(c[0] for c in checks), f"{label} " + ", ".join(c[1] for c in checks)))
    return out


def _short(v):
    return f"{v:.6g}" if isinstance(v, float) else repr(v)


def threads():
    """Worker cap from ``JUMP_THREADS`` (default: CPU count)."""
    raw = os.environ.get("JUMP_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ScenarioError(f"JUMP_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ScenarioError(f"JUMP_THREADS must be a positive integer, got {raw!r}")
    return n


def execute(spec, qp_dump_dir=None):
    """Run one resolved spec; returns ``(JumpResult, LaunchProfile)``."""
    model, profile, cc, sc, squat = _build(spec)
    if qp_dump_dir is not None:
        cc.qp_dump_dir = str(qp_dump_dir)
    state0 = initial_state(model, sc.contact, squat)
    return run_jump(model, profile, cc, sc, state0, spec.feet), profile


def _execute_task(args):
    return execute(*args)


def run_many(tasks):
    """Run ``(spec, dump_dir)`` tasks, in parallel when allowed; results keep task order."""
    workers = min(threads(), len(tasks))
    if workers <= 1:
        return [_execute_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_task, tasks))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n")


def _json_default(v):
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def run_scenario(scenario, out_dir=None, dump_qp=False, echo=print):
    """Run every run of ``scenario``, write artifacts, print one verdict per expectation.

    Writes ``profile.csv``, ``summary.json`` and ``log.csv`` (one
    subdirectory per run when there are several). Returns the exit code:
    0 all expectations pass, 1 one fails, 3 a run faulted.
    """
    out = Path(out_dir or scenario.output or Path("jump_out") / scenario.name)
    single = len(scenario.runs) == 1
    run_dirs = [out if single else out / r.name for r in scenario.runs]
    tasks = [(r, d if dump_qp else None) for r, d in zip(scenario.runs, run_dirs)]
    results = run_many(tasks)
    out.mkdir(parents=True, exist_ok=True)
    results[0][1].to_csv(out / "profile.csv")
    summaries = {}
    for spec, d, (res, _) in zip(scenario.runs, run_dirs, results):
        d.mkdir(parents=True, exist_ok=True)
        res.log.to_csv(d / "log.csv")
        summaries[spec.name] = res.summary
        if not single:
            write_json(d / "summary.json", res.summary)
    verdicts = evaluate(scenario.expectations, summaries)
    for ok, line in verdicts:
        echo(f"{'PASS' if ok else 'FAIL'} {line}")
    faulted = [n for n, s in summaries.items() if s["status"] in ("controller_fault", "sim_fault")]
    for n in faulted:
        echo(f"FAULT {n}: {summaries[n]['status']}: {summaries[n]['fault']}")
    verdict = {"scenario": scenario.name, "passed": not faulted and all(v[0] for v in verdicts),
               "expectations": [{"passed": ok, "check": line} for ok, line in verdicts]}
    if single:
        write_json(out / "summary.json", {**summaries[scenario.runs[0].name], **verdict})
    else:
        write_json(out / "summary.json", {**verdict, "runs": summaries})
    if faulted:
        return EXIT_FAULT
    return EXIT_OK if verdict["passed"] else EXIT_EXPECTATION


def grid_points(grid):
    """Cross product of a ``{dotted key: [values]}`` grid, in key order; empty grid has no points."""
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ScenarioError("grid must map setting paths to lists of values")
    if not grid:
        return []
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sweep(scenario_dict, grid, base_dir=Path("."), out_path=None):
    """Run the scenario at every grid point; writes and returns the aggregated CSV path.

    One row per (grid point, run). Faulted runs are recorded in their row
    and the sweep continues.
    """
    points = grid_points(grid)
    base = {k: v for k, v in scenario_dict.items() if k != "expectations"}
    scenarios = []
    for p in points:
        d = copy.deepcopy(base)
        for k, v in p.items():
            set_path(d, k, v)
        scenarios.append(parse_scenario(d, base_dir))
    if not scenarios:
        parse_scenario(base, base_dir)
    tasks = [(r, None) for sc in scenarios for r in sc.runs]
    results = run_many(tasks)
    out_path = Path(out_path or Path(scenario_dict.get("output") or Path("jump_out") / scenario_dict["name"])
                    / "sweep.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + ["run"] + list(SWEEP_FIELDS))
        i = 0
        for p, sc in zip(points, scenarios):
            for r in sc.runs:
                s = results[i][0].summary
                i += 1
                w.writerow([_cell(p[k]) for k in keys] + [r.name] + [_cell(s[f]) for f in SWEEP_FIELDS])
    return out_path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def dump_profile(params, out_path, dt=1e-3):
    """Write the launch profile for a jump settings dict as CSV; returns the profile."""
    try:
        _, profile = make_profile(params)
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioError(f"bad jump parameters: {exc}") from exc
    if not dt > 0.0:
        raise ScenarioError("profile sample step must be positive")
    profile.to_csv(out_path, dt)
    return profile
