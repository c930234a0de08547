import json
import math

import pytest

from eg_gripper import pneumatics as pn
from eg_gripper.errors import ConfigurationError, ScenarioLoadError
from eg_gripper.force_model import Actuation, MaterialParams, mode_for_object
from eg_gripper.geometry import GripperGeometry, ObjectSpec
from eg_gripper.harness import (
    Scenario,
    ScriptedEvent,
    reference_traces,
    force_table,
    load_scenario,
    replay_reference_traces,
    run,
    scenario_dict_template,
    scenario_from_dict,
    write_force_table,
)
from eg_gripper.tigms import GraspMode

ONE_CUP_CONFLICT = pytest.mark.xfail(
    strict=True,
    reason="only the central DSE seals on 5-10 mm spheres, so the classifier sees a one-cup cluster (Mode2) "
           "while the size rule puts d >= d_m in Mode3",
)


def test_sub_millimetre_bead_lifts_in_mode1(tmp_path, calibrated):
    report = run(Scenario(ObjectSpec.sphere(0.5, mass=0.1), 0.05, 1.2, seed=1, params=calibrated), tmp_path)
    assert report.selected_mode is GraspMode.MODE1
    assert report.membrane == "Slack"
    assert report.lift_success
    assert report.force_breakdown.F_g >= 0.1e-3 * 9.80665


def test_liquid_capture_and_injection(tmp_path):
    script = (ScriptedEvent(1.2, pn.InjectCommand(0)),)
    report = run(Scenario(ObjectSpec.liquid(789.0), 0.05, 1.3, seed=2, script=script), tmp_path)
    assert report.selected_mode is GraspMode.LIQUID
    assert report.circuit_phases[0] == "Injecting"
    log = [json.loads(line) for line in report.decision_log_path.read_text().splitlines()]
    liquid = [e for e in log if e["event"] == "LiquidDetected"]
    assert len(liquid) == 1 and liquid[0]["dse_id"] == 0
    # the circuit shut on the same tick the voltage crossed
    rows = report.actuator_log_path.read_text().splitlines()
    assert f"{liquid[0]['t']:.10g},0,0,Closed,Closed" in rows
    assert not report.lift_success


def test_liquid_held_before_injection(tmp_path):
    report = run(Scenario(ObjectSpec.liquid(1000.0), 0.05, 1.2, seed=3), tmp_path)
    assert report.circuit_phases[0] == "LiquidHeld"


def test_non_conductive_liquid_is_not_detected(tmp_path):
    report = run(Scenario(ObjectSpec.liquid(789.0, conductive=False), 0.05, 1.2, seed=4), tmp_path)
    assert report.selected_mode is GraspMode.NO_GRASP


def test_zero_duration(tmp_path):
    report = run(Scenario(ObjectSpec.sphere(15.0), 0.0, 0.0, seed=5), tmp_path)
    assert report.selected_mode is GraspMode.NO_GRASP
    assert report.force_breakdown is None and not report.lift_success
    assert len(report.trace_path.read_text().splitlines()) == 1
    assert report.decision_log_path.read_text() == ""
    assert len(report.actuator_log_path.read_text().splitlines()) == 1


def test_decision_happens_one_second_after_contact(tmp_path):
    report = run(Scenario(ObjectSpec.sphere(15.0), 0.2, 1.5, seed=6), tmp_path)
    decision = [json.loads(x) for x in report.decision_log_path.read_text().splitlines()][0]
    assert decision["event"] == "ModeDecision"
    assert decision["t"] == pytest.approx(1.2)
    assert set(decision) >= {"t", "mode", "engaged_ids", "V", "dp_vector"}
    assert len(decision["dp_vector"]) == 19


def test_too_short_for_a_decision(tmp_path):
    assert run(Scenario(ObjectSpec.sphere(15.0), 0.2, 1.0, seed=6), tmp_path).selected_mode is GraspMode.NO_GRASP


@pytest.mark.parametrize("d", [
    0.5, 1.0, 3.0,
    pytest.param(5.0, marks=ONE_CUP_CONFLICT),
    pytest.param(10.0, marks=ONE_CUP_CONFLICT),
    15.0, 25.0, 40.0,
])
def test_controller_and_physics_agree_on_mode(tmp_path, d):
    obj = ObjectSpec.sphere(d)
    report = run(Scenario(obj, 0.05, 1.1, seed=int(d * 10)), tmp_path)
    assert report.selected_mode.value == mode_for_object(obj, GripperGeometry()).value


def test_flat_top_runs_synergistic(tmp_path, calibrated):
    report = run(Scenario(ObjectSpec.flat(mass=100.0), 0.0, 1.2, seed=7, params=calibrated), tmp_path)
    assert report.selected_mode is GraspMode.MODE3 and report.membrane == "Jammed"
    assert report.force_breakdown.F_g == pytest.approx(6.14, rel=1e-6)
    assert len(report.engaged_ids) == 19


@pytest.mark.parametrize("mass,k,expected", [(10.0, 1.0, True), (1e5, 1.0, False), (60.0, 2.0, False)])
def test_lift_rule(tmp_path, mass, k, expected):
    params = MaterialParams(mu=0.9, sigma0=1.0, P_c=15.0)
    report = run(Scenario(ObjectSpec.sphere(15.0, mass), 0.0, 1.1, seed=8, k_safety=k, params=params), tmp_path)
    fg = report.force_breakdown.F_g
    assert report.lift_success is (fg >= mass * 1e-3 * 9.80665 * k) is expected


def test_release_script_drops_grasp(tmp_path):
    script = (ScriptedEvent(1.15, pn.ReleaseCommand()),)
    report = run(Scenario(ObjectSpec.sphere(15.0, 1.0), 0.0, 1.2, seed=9, script=script), tmp_path)
    assert set(report.circuit_phases) == {"Standby"}
    assert report.membrane == "Slack" and not report.lift_success


def test_rejected_script_command_is_logged(tmp_path):
    script = (ScriptedEvent(0.5, pn.InjectCommand(3)), ScriptedEvent(0.6, pn.DisengagedDetected(frozenset({77}))))
    report = run(Scenario(ObjectSpec.sphere(15.0), 0.0, 1.1, seed=10, script=script), tmp_path)
    log = [json.loads(x) for x in report.decision_log_path.read_text().splitlines()]
    assert [e["event"] for e in log if "rejected" in e] == ["InjectCommand", "DisengagedDetected"]


def test_report_json_matches_run(tmp_path):
    report = run(Scenario(ObjectSpec.sphere(25.0, 5.0), 0.0, 1.1, seed=11), tmp_path)
    data = json.loads(report.report_path.read_text())
    assert data["selected_mode"] == "Mode3"
    assert data["lift_success"] == (data["force_breakdown"]["F_g"] >= data["weight_N"])
    assert data["files"] == {"trace": "trace.csv", "decisions": "decisions.jsonl", "actuators": "actuators.csv"}


def test_scenario_invariants():
    with pytest.raises(ConfigurationError):
        Scenario(ObjectSpec.flat(), 2.0, 1.0, seed=1)
    with pytest.raises(ConfigurationError):
        Scenario(ObjectSpec.flat(), 0.0, 1.0, seed=1, tick=0.0)


def test_scenario_loading(tmp_path):
    data = scenario_dict_template()
    data.update(params={"mu": 0.8, "P_c_kpa": 20.0}, thresholds={"t_decision": 0.5}, geometry={"wrap_depth": 6.0},
                script=[{"t": 1.0, "event": "ReleaseCommand"}])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data, indent=2))
    sc = load_scenario(path)
    assert sc.params.P_c == 20.0 and sc.thresholds.t_decision == 0.5 and sc.geometry.wrap_depth == 6.0
    assert isinstance(sc.script[0].event, pn.ReleaseCommand)


def test_schema_error_reports_line_and_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "object": {\n    "kind": "sphere",\n    "diameter_mm": -3\n  },\n'
                    '  "contact_time_s": 0.1,\n  "duration_s": 1.0,\n  "seed": 1\n}\n')
    with pytest.raises(ScenarioLoadError) as info:
        load_scenario(path)
    assert any("line 4" in d and "object.diameter_mm" in d for d in info.value.diagnostics)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "object": {"kind": "flat"},\n  "seed": 1,\n}\n')
    with pytest.raises(ScenarioLoadError) as info:
        load_scenario(path)
    assert info.value.diagnostics[0].startswith("line 4")


@pytest.mark.parametrize("patch", [
    {"tick_s": 0},
    {"object": {"kind": "sphere"}},
    {"object": {"kind": "liquid"}},
    {"extra": 1},
    {"script": [{"t": 1.0, "event": "InjectCommand"}]},
])
def test_schema_rejections(patch):
    data = scenario_dict_template()
    data.update(patch)
    with pytest.raises(ScenarioLoadError):
        scenario_from_dict(data)


def test_semantic_rejection_after_schema():
    data = scenario_dict_template()
    data["contact_time_s"] = 5.0
    with pytest.raises(ScenarioLoadError):
        scenario_from_dict(data)
    data = scenario_dict_template()
    data["geometry"] = {"cup_radius": -1.0}
    with pytest.raises(ScenarioLoadError) as info:
        scenario_from_dict(data)
    assert "field geometry" in info.value.diagnostics[0]


def test_force_table_rows_and_additivity(tmp_path, calibrated):
    rows = force_table(list(range(5, 45, 5)), calibrated)
    assert len(rows) == 27
    for act in Actuation:
        assert sum(r["actuation"] == act.value for r in rows) == 9
    by_key = {(r["actuation"], r["object"], r["d_mm"]): r for r in rows}
    for d in [*range(5, 45, 5), None]:
        kind = "flat" if d is None else "sphere"
        suction, jamming, both = (by_key[(a, kind, d)]["F_g"] for a in ("SuctionOnly", "JammingOnly", "Synergistic"))
        assert suction + jamming <= both + 1e-12
    path = write_force_table(tmp_path / "t.csv", rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "actuation,object,d_mm,mode,n_engaged,F_s,F_f,F_g"
    assert len(lines) == 28


def test_reference_replay_files(tmp_path):
    p_path, v_path = replay_reference_traces(tmp_path)
    pressure = dict(line.split(",") for line in p_path.read_text().splitlines()[1:])
    assert float(pressure["1"]) == pytest.approx(1.42, abs=1e-6)
    assert float(pressure["5"]) == pytest.approx(2.78, abs=1e-6)
    volts = v_path.read_text().splitlines()
    assert volts[1] == "0,5"
    t_p, dp, t_v, v = reference_traces()
    assert math.isclose(v[-1], 0.87, abs_tol=0.01)
