import json

from click.testing import CliRunner

from clook.cli import main


SCENARIO = "\n".join([
    json.dumps({"clocks": [{"id": "a"}], "seed": 3, "duration_ms": 5000}),
    json.dumps({"t_ms": 0, "clock_id": "a", "face_count": 1}),
]) + "\n"


def test_run_prints_metrics(tmp_path):
    scen = tmp_path / "s.jsonl"
    scen.write_text(SCENARIO)
    res = CliRunner().invoke(main, ["run", "--scenario", str(scen)])
    assert res.exit_code == 0
    metrics = json.loads(res.output)
    assert "a" in metrics and "displayed_drift_ms" in metrics["a"]


def test_run_bad_scenario_exits_2(tmp_path):
    scen = tmp_path / "bad.jsonl"
    scen.write_text('{"clocks": "nope"}\n')
    res = CliRunner().invoke(main, ["run", "--scenario", str(scen)])
    assert res.exit_code == 2


def test_run_with_config_and_trace_out(tmp_path):
    scen = tmp_path / "s.jsonl"
    scen.write_text(SCENARIO)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"warp_policy": {"rate_away": 120.0},
                               "sim": {"hold_ms": 0}}))
    out = tmp_path / "t.jsonl"
    res = CliRunner().invoke(main, ["run", "--scenario", str(scen),
                                    "--config", str(cfg),
                                    "--trace-out", str(out)])
    assert res.exit_code == 0
    assert out.read_text().count("\n") > 0


def test_replay_emits_display_samples(tmp_path):
    scen = tmp_path / "s.jsonl"
    scen.write_text(SCENARIO)
    out = tmp_path / "t.jsonl"
    CliRunner().invoke(main, ["run", "--scenario", str(scen),
                              "--trace-out", str(out)])
    res = CliRunner().invoke(main, ["replay", "--trace", str(out)])
    assert res.exit_code == 0
    lines = [json.loads(l) for l in res.output.splitlines() if l.strip()]
    assert lines and all(l["kind"] == "DISPLAY_SAMPLE" for l in lines)


def test_replay_bad_trace_exits_2(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    res = CliRunner().invoke(main, ["replay", "--trace", str(bad)])
    assert res.exit_code == 2
