from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from drivebridge import trace as tr
from drivebridge.controller import kmh_to_ms
from drivebridge.metrics import speed_profile_stats
from drivebridge.perception import NO_DRIFT, Condition, ObjectClass, SceneObject
from drivebridge.scenario import (BUILTINS, ScenarioParseError, ScenarioSpec,
                                  ScenarioValidationError, builtin, dump_scenario,
                                  generate_scene, load_scenario, paper_replica_spec, run,
                                  simulate)
from drivebridge.summary import phases

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """
[scenario]
seed = 3
duration_s = 10
initial_speed_kmh = 30
"""


def test_minimal_spec_defaults():
    spec = load_scenario(MINIMAL)
    assert spec.tick_hz == 10.0
    assert spec.mapping.as_dict() == {30.0: 25.0, 90.0: 80.0}
    assert spec.weather_schedule[0][1].condition is Condition.Clear
    assert spec.drift.kind == "None" and spec.objects == ()


def test_weather_out_of_order():
    text = MINIMAL + """
[weather.0]
time_s = 5
condition = Fog
[weather.1]
time_s = 2
condition = Clear
"""
    with pytest.raises(ScenarioValidationError):
        load_scenario(text)


@pytest.mark.parametrize("text, line, key", [
    ("[scenario]\nseed = x\nduration_s = 1\ninitial_speed_kmh = 1\n", 2, "seed"),
    ("[scenario]\nseed = 1\nduration_s = 1\n", 1, "initial_speed_kmh"),
    (MINIMAL + "[object.0]\nclass = Stop\nposition_m = 3\n", 7, "class"),
    (MINIMAL + "[drift]\nkind = None\nbogus = 1\n", 8, "bogus"),
    ("seed = 1\n", 1, None),
])
def test_parse_errors_name_line_and_field(text, line, key):
    with pytest.raises(ScenarioParseError) as err:
        load_scenario(text)
    assert err.value.line == line and err.value.key == key


@pytest.mark.parametrize("extra", [
    "[object.0]\nclass = Obstacle\nposition_m = 5000\n",
    "[mapping]\n30 = 40\n",
    "[weather.0]\ntime_s = 0\ncondition = Fog\nvisibility_m = 900\n",
])
def test_validation_errors(extra):
    with pytest.raises(ScenarioValidationError):
        load_scenario(MINIMAL + extra)


def test_validation_of_scalars():
    with pytest.raises(ScenarioValidationError):
        load_scenario(MINIMAL.replace("duration_s = 10", "duration_s = 0"))
    with pytest.raises(ScenarioValidationError):
        ScenarioSpec(seed=1, duration_s=1.0, initial_speed_kmh=10, tick_hz=0).validate()


def test_replica_fixture_file():
    spec = load_scenario((SCENARIOS / "paper_replica.scenario").read_text())
    assert [o.object_class for o in spec.objects] == [ObjectClass.SpeedLimit30,
                                                      ObjectClass.SpeedLimit90]
    assert [w.condition for _, w in spec.weather_schedule] == [Condition.Fog, Condition.Clear]
    assert spec == paper_replica_spec()


def test_replica_spec_contents():
    spec = paper_replica_spec()
    assert spec.initial_speed_kmh == 40.0
    assert spec.mapping.get(30.0) == 25.0 and spec.mapping.get(90.0) == 80.0
    sign30 = next(o for o in spec.objects if o.object_class is ObjectClass.SpeedLimit30)
    # fog is in force while the 30 sign is approached
    assert spec.weather_schedule[0][1].condition is Condition.Fog
    assert sign30.position < spec.weather_schedule[1][0] * kmh_to_ms(40.0)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_dump_load_roundtrip(name):
    spec = builtin(name)
    assert load_scenario(dump_scenario(spec)) == spec


def test_drift_sections_roundtrip():
    text = MINIMAL + ("[drift]\nkind = Concept\nrelabel.SpeedLimit30 = SpeedLimit90\n"
                      "weight.Obstacle = 0.5\n")
    spec = load_scenario(text)
    assert spec.drift.relabel == {ObjectClass.SpeedLimit30: ObjectClass.SpeedLimit90}
    assert load_scenario(dump_scenario(spec)) == spec


def test_tick_count():
    records = run(load_scenario(MINIMAL))
    assert sum(r.kind == tr.VEHICLE for r in records) == 100


def test_records_time_ordered_and_tick_order():
    records = run(paper_replica_spec())
    times = [r.time for r in records]
    assert times == sorted(times)
    kinds_at = {}
    for r in records:
        if r.kind != tr.VEHICLE:
            kinds_at.setdefault(r.time, []).append(r.kind)
    order = {tr.WEATHER: 0, tr.DETECTION: 1, tr.COMMAND: 2}
    for kinds in kinds_at.values():
        assert [order[k] for k in kinds] == sorted(order[k] for k in kinds)
        assert kinds.count(tr.COMMAND) == 1


def test_run_is_deterministic():
    spec = paper_replica_spec()
    assert tr.to_csv(run(spec)) == tr.to_csv(run(spec))


def test_seed_changes_trace():
    assert tr.to_csv(run(paper_replica_spec(1))) != tr.to_csv(run(paper_replica_spec(2)))


def test_replica_reaches_80_within_5s():
    records = run(paper_replica_spec())
    t_det = next(r.time for r in records if r.kind == tr.DETECTION and r["class_id"] == 1)
    stats = speed_profile_stats(records, kmh_to_ms(80.0), kmh_to_ms(1.0), t_start=t_det)
    assert stats.settling_time <= 5.0


@pytest.mark.parametrize("seed", range(0, 40, 3))
def test_replica_phases_hold_across_seeds(seed):
    ph = phases(run(paper_replica_spec(seed)), initial_speed=kmh_to_ms(40.0))
    dec = next(p for p in ph if p["target_kmh"] == pytest.approx(25.0))
    acc = next(p for p in ph if p["target_kmh"] == pytest.approx(80.0))
    assert acc["start_speed_kmh"] == pytest.approx(49.4, abs=0.5)
    assert acc["settling_time_s"] == pytest.approx(4.8, abs=0.3)
    assert dec["settling_time_s"] == pytest.approx(3.9, abs=0.3)


def test_obstacle_scenario_stops_before_obstacle():
    result = simulate(builtin("fog-drift"))
    assert result.final_state.speed < 0.01
    obstacle = next(o for o in result.spec.objects if o.object_class is ObjectClass.Obstacle)
    assert result.final_state.position < obstacle.position


def test_truth_rows_match_visible_objects():
    result = simulate(paper_replica_spec())
    assert result.truths
    assert all(0 < w <= 1 for _, _, _, _, w, _, _ in result.truths)
    detected = {(round(r.time, 6), r["truth_id"]) for r in result.trace if r.kind == tr.DETECTION}
    visible = {(round(t, 6), tid) for t, *_, tid in result.truths}
    assert detected <= visible


def test_queue_overflow_is_reported():
    spec = replace(builtin("fog-drift"), queue_capacity=1, drift=NO_DRIFT,
                   objects=(SceneObject("SpeedLimit30", 20.0), SceneObject("SpeedLimit90", 21.0)))
    result = simulate(spec)
    both = sum(1 for t in {r.time for r in result.trace if r.kind == tr.DETECTION}
               if sum(r.time == t for r in result.trace if r.kind == tr.DETECTION) == 2)
    assert result.dropped == {"controller/detections": both}
    assert simulate(replace(spec, queue_capacity=16)).dropped == {}


def test_generate_scene_prior_shift():
    rng = np.random.default_rng(0)
    scene = generate_scene(rng, 20_000, 10_000.0, {"SpeedLimit30": 3.0, "SpeedLimit90": 1.0,
                                                    "Obstacle": 0.0})
    counts = np.bincount([int(o.object_class) for o in scene], minlength=3)
    assert counts[2] == 0
    assert counts[0] / len(scene) == pytest.approx(0.75, abs=0.015)
    positions = [o.position for o in scene]
    assert positions == sorted(positions)
