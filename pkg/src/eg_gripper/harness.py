"""Closed-loop scenario runner and batch tables.

The plant (geometry, force model, simulated sensors) produces one frame per
tick; the controller (mode selection plus the pneumatic state machine)
reacts to those frames only.  Everything is seeded, so a scenario file
always reproduces the same output bytes.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import pneumatics as pn
from .errors import ConfigurationError, ContractError, RejectedCommandError, ScenarioLoadError
from .force_model import Actuation, ForceBreakdown, MaterialParams, mode_for_object, total_grasp_force
from .geometry import (
    GripperGeometry,
    ObjectKind,
    ObjectSpec,
    Regime,
    adjacency_map,
    build_layout,
    solve_contact,
)
from .sensor_sim import (
    LiquidDetector,
    SealKind,
    SensorStream,
    detector_closed,
    detector_voltage,
    membrane_pressure,
    reference_pressure_model,
    write_trace,
)
from .tigms import GraspMode, Thresholds, classify_dse, select_mode

GRAVITY = 9.80665
LIQUID_INGRESS_DSE = 0

_REGIME_SEAL = {
    Regime.CAPILLARY_ONLY: SealKind.CAPILLARY,
    Regime.PARTIAL_CUP: SealKind.CUP,
    Regime.MULTI_DSE: SealKind.CUP,
    Regime.FLAT: SealKind.CUP,
}


@dataclass(frozen=True)
class ScriptedEvent:
    t: float
    event: object


@dataclass(frozen=True)
class Scenario:
    object: ObjectSpec
    contact_time: float
    duration: float
    seed: int
    tick: float = 0.001
    noise: bool = True
    k_safety: float = 1.0
    geometry: GripperGeometry = field(default_factory=GripperGeometry)
    params: MaterialParams = field(default_factory=MaterialParams)
    thresholds: Thresholds = field(default_factory=Thresholds)
    script: tuple = ()
    name: str = ""

    def __post_init__(self):
        if not self.tick > 0:
            raise ConfigurationError("tick must be > 0")
        if not 0 <= self.contact_time <= self.duration:
            raise ConfigurationError("need 0 <= contact_time <= duration")
        if not self.k_safety > 0:
            raise ConfigurationError("k_safety must be > 0")


@dataclass
class RunReport:
    selected_mode: GraspMode
    physics_mode: str | None
    engaged_ids: list
    force_breakdown: ForceBreakdown | None
    lift_success: bool
    weight_N: float
    circuit_phases: list
    membrane: str
    trace_path: Path
    decision_log_path: Path
    actuator_log_path: Path
    report_path: Path

    def to_dict(self) -> dict:
        return {
            "selected_mode": self.selected_mode.value,
            "physics_mode": self.physics_mode,
            "engaged_ids": self.engaged_ids,
            "force_breakdown": self.force_breakdown.to_dict() if self.force_breakdown else None,
            "lift_success": self.lift_success,
            "weight_N": self.weight_N,
            "circuit_phases": self.circuit_phases,
            "membrane": self.membrane,
            # names only, so reports from different output folders stay identical
            "files": {
                "trace": self.trace_path.name,
                "decisions": self.decision_log_path.name,
                "actuators": self.actuator_log_path.name,
            },
        }


# scenario loading --------------------------------------------------------

def scenario_schema() -> dict:
    text = resources.files("eg_gripper").joinpath("schemas/scenario.schema.json").read_text()
    return json.loads(text)


def _line_of(text: str, path: Sequence) -> int | None:
    """Best-effort source line of a JSON path (keys searched in order)."""
    pos, found = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        idx = text.find(json.dumps(key), pos)
        if idx < 0:
            break
        pos, found = idx, idx
    return None if found is None else text.count("\n", 0, found) + 1


def _where(text: str, path: Sequence) -> str:
    dotted = ".".join(str(p) for p in path) or "<root>"
    line = _line_of(text, path)
    return f"line {line}, field {dotted}" if line else f"field {dotted}"


def _object_from(data: dict) -> ObjectSpec:
    kind = data["kind"]
    if kind == "sphere":
        return ObjectSpec.sphere(data["diameter_mm"], data.get("mass_g", 0.0))
    if kind == "flat":
        return ObjectSpec.flat(data.get("extent_mm", 100.0), data.get("mass_g", 0.0))
    return ObjectSpec.liquid(data["density_kg_m3"], data.get("conductive", True))


def _event_from(item: dict):
    name = item["event"]
    if name == "InjectCommand":
        return pn.InjectCommand(item["dse_id"])
    if name == "ReleaseCommand":
        return pn.ReleaseCommand()
    return pn.DisengagedDetected(frozenset(item["ids"]))


def scenario_from_dict(data: dict, text: str = "") -> Scenario:
    errors = sorted(jsonschema.Draft202012Validator(scenario_schema()).iter_errors(data),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioLoadError("scenario does not match the schema",
                                [f"{_where(text, list(e.absolute_path))}: {e.message}" for e in errors])
    sections = (
        ("geometry", GripperGeometry.from_dict, GripperGeometry()),
        ("params", MaterialParams.from_dict, MaterialParams()),
        ("thresholds", lambda d: Thresholds(**d), Thresholds()),
    )
    built = {}
    for key, factory, default in sections:
        try:
            built[key] = factory(data[key]) if key in data else default
        except (ConfigurationError, TypeError, ValueError) as exc:
            raise ScenarioLoadError("invalid scenario section", [f"{_where(text, [key])}: {exc}"]) from exc
    try:
        script = tuple(sorted((ScriptedEvent(float(i["t"]), _event_from(i)) for i in data.get("script", [])),
                              key=lambda s: s.t))
        return Scenario(
            object=_object_from(data["object"]),
            contact_time=float(data["contact_time_s"]),
            duration=float(data["duration_s"]),
            seed=int(data["seed"]),
            tick=float(data.get("tick_s", 0.001)),
            noise=bool(data.get("noise", True)),
            k_safety=float(data.get("k_safety", 1.0)),
            script=script,
            name=data.get("name", ""),
            **built,
        )
    except ConfigurationError as exc:
        raise ScenarioLoadError("invalid scenario", [f"{_where(text, [])}: {exc}"]) from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioLoadError(f"{path}: not valid JSON", [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    try:
        return scenario_from_dict(data, text)
    except ScenarioLoadError as exc:
        raise ScenarioLoadError(f"{path}: {exc.args[0]}", exc.diagnostics) from exc


# closed loop -------------------------------------------------------------

def _json_line(entry: dict) -> str:
    return json.dumps(entry, sort_keys=True, separators=(",", ":"))


def run(scenario: Scenario, out_dir) -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geometry, th = scenario.geometry, scenario.thresholds
    layout = build_layout(geometry)
    adjacency = adjacency_map(layout)
    n = geometry.n_dse
    obj = scenario.object

    # ground truth from the plant side
    seal_kinds = [SealKind.NONE] * n
    contact = None
    if obj.is_solid:
        contact = solve_contact(obj, geometry, layout)
        for dse_id in contact.engaged_ids:
            seal_kinds[dse_id] = _REGIME_SEAL[contact.regime]
    detector = LiquidDetector()
    liquid_closes = obj.kind is ObjectKind.LIQUID and detector_closed(detector, obj.density, obj.conductive)

    stream = SensorStream(n, scenario.seed, reference_pressure_model(), detector, noise=scenario.noise)
    controller = pn.PneumaticController(n)
    frames, decisions = [], []
    n_ticks = int(round(scenario.duration / scenario.tick))
    # contact registers on the first tick at or after contact_time
    k_contact = math.ceil(scenario.contact_time / scenario.tick - 1e-9)
    k_decide = k_contact + math.ceil(th.t_decision / scenario.tick - 1e-9)
    script = list(scenario.script)
    selected, engaged_ids = GraspMode.NO_GRASP, []
    k_jam = None
    prev_volts = detector.v_open

    for k in range(n_ticks):
        t = k * scenario.tick
        if k == 0:
            controller.apply(t, pn.Start())
        controller.apply(t, pn.Tick(scenario.tick))

        since = (k - k_contact) * scenario.tick if k >= k_contact else None
        seals = [(kind, since) for kind in seal_kinds]
        ingress = {LIQUID_INGRESS_DSE: since} if liquid_closes and since is not None else None
        membrane = membrane_pressure(None if k_jam is None else (k - k_jam) * scenario.tick, scenario.params.P_c)
        frame = stream.frame(t, seals, membrane, ingress)
        frames.append(frame)

        # liquid ingress is handled on the falling edge, inside this tick
        if frame.detector_voltage < th.v_liquid <= prev_volts and frame.detector_id is not None:
            controller.apply(t, pn.LiquidDetected(frame.detector_id))
            decisions.append({"t": t, "event": "LiquidDetected", "dse_id": frame.detector_id,
                              "V": frame.detector_voltage})
        prev_volts = frame.detector_voltage

        if k == k_decide:
            rel_t = np.arange(k_decide - k_contact + 1) * scenario.tick
            window = np.array([f.dse_pressure_drop for f in frames[k_contact:k_decide + 1]])
            obs = [classify_dse(rel_t, window[:, i], th, dse_id=i) for i in range(n)]
            selected = select_mode(obs, frame.detector_voltage, adjacency, th)
            engaged_ids = sorted(o.dse_id for o in obs if o.classification is not SealKind.NONE)
            decisions.append({"t": t, "event": "ModeDecision", "mode": selected.value, "engaged_ids": engaged_ids,
                              "V": frame.detector_voltage, "dp_vector": [o.dp_at_decision for o in obs]})
            if selected in (GraspMode.MODE1, GraspMode.MODE2, GraspMode.MODE3):
                controller.apply(t, pn.ContactDetected(frozenset(engaged_ids)))
            controller.apply(t, pn.ModeSelected(selected.value))
            if controller.state.membrane.jamming is pn.Jamming.JAMMED and k_jam is None:
                k_jam = k

        while script and script[0].t <= t + 1e-12:
            item = script.pop(0)
            try:
                controller.apply(t, item.event)
                decisions.append({"t": t, "event": type(item.event).__name__, "scripted": True})
            except (RejectedCommandError, ContractError) as exc:
                decisions.append({"t": t, "event": type(item.event).__name__, "rejected": str(exc)})
            if isinstance(item.event, pn.ReleaseCommand):
                k_jam = None

    state = controller.state
    phases = [p.value for p in state.phases()]
    holding = any(p is pn.Phase.ENGAGED for p in state.phases())
    breakdown, physics_mode = None, None
    if obj.is_solid:
        physics_mode = mode_for_object(obj, geometry).value
        if holding and selected in (GraspMode.MODE1, GraspMode.MODE2, GraspMode.MODE3):
            jammed = state.membrane.jamming is pn.Jamming.JAMMED
            actuation = Actuation.SYNERGISTIC if jammed else Actuation.SUCTION_ONLY
            breakdown = total_grasp_force(obj, scenario.params, geometry, contact, actuation)
    weight = obj.mass * 1e-3 * GRAVITY if obj.is_solid else 0.0
    lift = breakdown is not None and breakdown.F_g >= weight * scenario.k_safety

    trace_path = write_trace(out / "trace.csv", frames, n)
    decision_path = out / "decisions.jsonl"
    decision_path.write_text("".join(_json_line(d) + "\n" for d in decisions))
    actuator_path = controller.write_log(out / "actuators.csv")
    report = RunReport(selected, physics_mode, engaged_ids, breakdown, lift, weight, phases,
                       state.membrane.jamming.value, trace_path, decision_path, actuator_path, out / "report.json")
    report.report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


# batch commands ----------------------------------------------------------

TABLE_COLUMNS = ("actuation", "object", "d_mm", "mode", "n_engaged", "F_s", "F_f", "F_g")


def force_table(diameters: Sequence[float], params: MaterialParams, geometry: GripperGeometry | None = None,
                actuations: Sequence[Actuation] = tuple(Actuation)) -> list[dict]:
    """One row per (actuation, diameter) plus a flat-top row per actuation."""
    geometry = geometry or GripperGeometry()
    layout = build_layout(geometry)
    objects = [ObjectSpec.sphere(d) for d in diameters] + [ObjectSpec.flat()]
    rows = []
    for actuation in actuations:
        for obj in objects:
            contact = solve_contact(obj, geometry, layout)
            fb = total_grasp_force(obj, params, geometry, contact, actuation)
            rows.append({
                "actuation": actuation.value,
                "object": obj.kind.value,
                "d_mm": obj.size if obj.kind is ObjectKind.SPHERE else None,
                "mode": fb.mode.value,
                "n_engaged": contact.n_engaged,
                "F_s": fb.F_s,
                "F_f": fb.F_f,
                "F_g": fb.F_g,
            })
    return rows


def write_force_table(path, rows: Sequence[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for r in rows:
            writer.writerow([
                r["actuation"], r["object"], "" if r["d_mm"] is None else format(r["d_mm"], "g"), r["mode"],
                r["n_engaged"], *(format(r[c], ".10g") for c in ("F_s", "F_f", "F_g")),
            ])
    return path


def reference_traces() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Noise-free engagement pressure (0-6 s) and detector voltage (0-100 ms)."""
    model = reference_pressure_model()
    t_p = np.arange(601) / 100.0
    dp = np.array([model.clean(t, SealKind.CUP) for t in t_p])
    t_v = np.arange(1001) / 10000.0
    volts = np.array([detector_voltage(t, True) for t in t_v])
    return t_p, dp, t_v, volts


def replay_reference_traces(out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_p, dp, t_v, volts = reference_traces()
    paths = (out / "engagement_pressure.csv", out / "detector_voltage.csv")
    for path, header, xs, ys in ((paths[0], ("t_s", "dp_kpa"), t_p, dp), (paths[1], ("t_s", "volts"), t_v, volts)):
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows((format(x, ".10g"), format(y, ".10g")) for x, y in zip(xs, ys))
    return paths


def with_overrides(scenario: Scenario, *, seed: int | None = None, noise: bool | None = None) -> Scenario:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if noise is not None:
        changes["noise"] = noise
    return replace(scenario, **changes) if changes else scenario


def scenario_dict_template() -> dict:
    """A minimal valid scenario, handy for tests and docs."""
    return copy.deepcopy({
        "object": {"kind": "sphere", "diameter_mm": 15.0, "mass_g": 10.0},
        "contact_time_s": 0.1,
        "duration_s": 1.5,
        "seed": 1,
    })
