import json

import pytest

from clook.scenario import (ScenarioError, SimConfig, TraceEvent,
                            metrics_from_trace, parse_config, parse_scenario)
from clook.timewarp import Resync


def header(**kw):
    h = {"clocks": [{"id": "a"}], "seed": 1, "duration_ms": 10_000}
    h.update(kw)
    return json.dumps(h)


def event(t, cid="a", fc=1):
    return json.dumps({"t_ms": t, "clock_id": cid, "face_count": fc})


def test_parse_minimal_scenario():
    s = parse_scenario([header(), event(0), event(100)])
    assert [c.id for c in s.clocks] == ["a"]
    assert len(s.events) == 2
    assert s.end_ms == 10_000


def test_error_reports_line_and_field():
    with pytest.raises(ScenarioError) as ei:
        parse_scenario([header(), event(0), '{"t_ms": 5}'])
    assert ei.value.line == 3
    assert ei.value.field == "clock_id"


def test_undeclared_clock_rejected():
    with pytest.raises(ScenarioError) as ei:
        parse_scenario([header(), event(0, cid="ghost")])
    assert ei.value.field == "clock_id"


def test_unsorted_events_rejected():
    with pytest.raises(ScenarioError) as ei:
        parse_scenario([header(), event(500), event(100)])
    assert ei.value.field == "t_ms"


def test_duplicate_clock_ids_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario([json.dumps({"clocks": [{"id": "a"}, {"id": "a"}]})])


def test_invalid_json_rejected():
    with pytest.raises(ScenarioError) as ei:
        parse_scenario([header(), "{oops"])
    assert ei.value.line == 2


def test_policy_override_parsed():
    s = parse_scenario([json.dumps({"clocks": [
        {"id": "a", "policy": {"rate_away": 10.0, "resync": "SNAP"}}]})])
    assert s.clocks[0].policy.rate_away == 10.0
    assert s.clocks[0].policy.resync == Resync.SNAP


def test_config_mirrors_component_field_names():
    cfg = parse_config({
        "warp_policy": {"rate_away": 120.0, "override_duration_ms": 5000},
        "gear_train": {"steps_per_motor_rev": 2048},
        "link": {"latency_ms": 200, "drop_probability": 0.1},
        "peer": {"heartbeat_ms": 250},
        "sim": {"hold_ms": 0, "motors_enabled": False},
    })
    assert cfg.warp_policy.rate_away == 120.0
    assert cfg.gear_train.steps_per_motor_rev == 2048
    assert cfg.link.latency_ms == 200
    assert cfg.peer == {"heartbeat_ms": 250}
    assert cfg.hold_ms == 0 and cfg.motors_enabled is False


def test_trace_event_json_round_trip():
    ev = TraceEvent(42, "a", "DISPLAY_SAMPLE", {"tod_ms": 1.5, "mode": "FAST"})
    assert TraceEvent.from_json(ev.to_json()) == ev


def test_metrics_fold_dwell_and_drift():
    trace = [
        TraceEvent(0, "a", "DISPLAY_SAMPLE",
                   {"tod_ms": 0.0, "civil_tod_ms": 0, "mode": "FAST"}),
        TraceEvent(1000, "a", "ATTENTION", {"state": "WATCHING"}),
        TraceEvent(5000, "a", "DISPLAY_SAMPLE",
                   {"tod_ms": 63_000.0, "civil_tod_ms": 5000, "mode": "NORMAL"}),
    ]
    m = metrics_from_trace(trace).clocks["a"]
    assert m.dwell_ms == {"AWAY": 1000, "WATCHING": 4000}
    assert m.displayed_drift_ms == 58_000.0


def test_metrics_fold_counts_drops_and_shows():
    trace = [
        TraceEvent(0, "a", "FRAME_TX", {"dropped": True}),
        TraceEvent(1, "a", "FRAME_TX", {"dropped": False}),
        TraceEvent(2, "a", "PRESENCE", {"event": "SHOWING_ENTER", "window_id": 1}),
        TraceEvent(3, "a", "FRAME_RX", {"skew_before_deg": 0.4, "skew_deg": 0.1}),
    ]
    m = metrics_from_trace(trace).clocks["a"]
    assert m.frames_dropped == 1
    assert m.mutual_show_count == 1
    assert m.max_hand_skew_deg == 0.4
