"""Scenario and trace file handling (line-delimited JSON) and run metrics.

A scenario file is one header object on the first line followed by one
observation event per line:

    {"clocks":[{"id":"a","tz_offset_minutes":0}],"seed":1,"duration_ms":60000}
    {"t_ms":0,"clock_id":"a","face_count":1}

Metrics are a pure fold over trace events, so they can always be recomputed
from an emitted trace file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

from .attention import AttentionState
from .motor import GearTrain
from .serial_link import LinkModel
from .timewarp import HALF_DAY_MS, Resync, WarpPolicy

TRACE_KINDS = ("ATTENTION", "DISPLAY_SAMPLE", "STEP", "FRAME_TX", "FRAME_RX",
               "PRESENCE", "OVERRIDE")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None,
                 field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


@dataclass(frozen=True)
class ClockSpec:
    id: str
    tz_offset_minutes: int = 0
    policy: Optional[WarpPolicy] = None  # None: use the run config's policy


@dataclass(frozen=True)
class ScenarioEvent:
    t_ms: int
    clock_id: str
    face_count: int


@dataclass
class Scenario:
    clocks: List[ClockSpec]
    events: List[ScenarioEvent] = field(default_factory=list)
    link: Optional[LinkModel] = None      # serial hour-motor channel
    network: Optional[LinkModel] = None   # presence datagram channel
    seed: int = 0
    duration_ms: Optional[int] = None
    utc_start_ms: int = 0

    @property
    def end_ms(self) -> int:
        if self.duration_ms is not None:
            return self.duration_ms
        return max((e.t_ms for e in self.events), default=0)


def _policy_from_dict(d: dict, line: Optional[int] = None) -> WarpPolicy:
    kwargs = dict(d)
    if "resync" in kwargs:
        try:
            kwargs["resync"] = Resync(kwargs["resync"])
        except ValueError:
            raise ScenarioError(f"unknown resync {kwargs['resync']!r}",
                                line, "resync")
    try:
        return WarpPolicy(**kwargs)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"bad warp policy: {e}", line, "policy")


def _link_from_dict(d: dict, line: Optional[int] = None,
                    field_name: str = "link") -> LinkModel:
    try:
        return LinkModel(**d)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"bad link model: {e}", line, field_name)


def _gear_from_dict(d: dict) -> GearTrain:
    kwargs = dict(d)
    for key in ("motor_to_ring_ratio",):
        if key in kwargs and isinstance(kwargs[key], (str, list)):
            v = kwargs[key]
            kwargs[key] = Fraction(*v) if isinstance(v, list) else Fraction(v)
    return GearTrain(**kwargs)


def parse_scenario(lines: Iterable[str]) -> Scenario:
    it = iter(enumerate(lines, start=1))
    header = None
    for lineno, raw in it:
        if raw.strip():
            try:
                header = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ScenarioError(f"invalid json: {e.msg}", lineno)
            break
    if header is None:
        raise ScenarioError("empty scenario file")
    if not isinstance(header, dict) or "clocks" not in header:
        raise ScenarioError("header must be an object with 'clocks'", 1, "clocks")
    clocks = []
    for c in header["clocks"]:
        if "id" not in c:
            raise ScenarioError("clock entry missing id", 1, "clocks.id")
        policy = _policy_from_dict(c["policy"], 1) if "policy" in c else None
        tz = c.get("tz_offset_minutes", 0)
        if not -720 <= tz <= 840:
            raise ScenarioError(f"tz_offset_minutes {tz} out of range", 1,
                                "tz_offset_minutes")
        clocks.append(ClockSpec(str(c["id"]), tz, policy))
    ids = [c.id for c in clocks]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate clock ids", 1, "clocks")
    if len(clocks) > 2:
        raise ScenarioError("at most two clocks are supported", 1, "clocks")

    scen = Scenario(
        clocks=clocks,
        link=_link_from_dict(header["link"], 1) if "link" in header else None,
        network=_link_from_dict(header["network"], 1, "network")
        if "network" in header else None,
        seed=int(header.get("seed", 0)),
        duration_ms=header.get("duration_ms"),
        utc_start_ms=int(header.get("utc_start_ms", 0)),
    )

    last_t: Dict[str, int] = {}
    for lineno, raw in it:
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"invalid json: {e.msg}", lineno)
        for key in ("t_ms", "clock_id", "face_count"):
            if key not in obj:
                raise ScenarioError("event missing field", lineno, key)
        cid = str(obj["clock_id"])
        if cid not in set(ids):
            raise ScenarioError(f"undeclared clock {cid!r}", lineno, "clock_id")
        t = int(obj["t_ms"])
        if t < last_t.get(cid, 0) - 0:
            raise ScenarioError("events not time-sorted for clock", lineno, "t_ms")
        last_t[cid] = t
        fc = int(obj["face_count"])
        if fc < 0:
            raise ScenarioError("face_count must be >= 0", lineno, "face_count")
        scen.events.append(ScenarioEvent(t, cid, fc))
    return scen


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f)


# -- run configuration ---------------------------------------------------

@dataclass
class SimConfig:
    warp_policy: WarpPolicy = field(default_factory=WarpPolicy)
    gear_train: GearTrain = field(default_factory=GearTrain)
    link: LinkModel = field(default_factory=LinkModel)
    network: LinkModel = field(default_factory=LinkModel)
    peer: Optional[dict] = None  # PeerConfig overrides (ids come from clocks)
    hold_ms: int = 500
    display_sample_ms: int = 1000
    motor_update_ms: int = 25
    motors_enabled: bool = True


def parse_config(obj: dict) -> SimConfig:
    cfg = SimConfig()
    if "warp_policy" in obj:
        cfg.warp_policy = _policy_from_dict(obj["warp_policy"])
    if "gear_train" in obj:
        try:
            cfg.gear_train = _gear_from_dict(obj["gear_train"])
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"bad gear train: {e}", field="gear_train")
    if "link" in obj:
        cfg.link = _link_from_dict(obj["link"])
    if "network" in obj:
        cfg.network = _link_from_dict(obj["network"], field_name="network")
    if "peer" in obj:
        cfg.peer = dict(obj["peer"])
    sim = obj.get("sim", {})
    for key in ("hold_ms", "display_sample_ms", "motor_update_ms"):
        if key in sim:
            setattr(cfg, key, int(sim[key]))
    if "motors_enabled" in sim:
        cfg.motors_enabled = bool(sim["motors_enabled"])
    return cfg


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"invalid config json: {e.msg}")
    if not isinstance(obj, dict):
        raise ScenarioError("config must be a json object")
    return parse_config(obj)


# -- trace ----------------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    t_ms: int
    clock_id: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"t_ms": self.t_ms, "clock_id": self.clock_id,
             "kind": self.kind, "payload": self.payload},
            sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "TraceEvent":
        obj = json.loads(line)
        return TraceEvent(obj["t_ms"], obj["clock_id"], obj["kind"],
                          obj["payload"])


def write_trace(events: Iterable[TraceEvent], path: str):
    with open(path, "w", encoding="utf-8") as f:
        for ev in events:
            f.write(ev.to_json())
            f.write("\n")


def read_trace(path: str) -> List[TraceEvent]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(TraceEvent.from_json(line))
    return out


# -- metrics --------------------------------------------------------------

@dataclass
class ClockMetrics:
    displayed_drift_ms: float = 0.0
    max_hand_skew_deg: float = 0.0
    mutual_show_count: int = 0
    frames_dropped: int = 0
    dwell_ms: Dict[str, int] = field(default_factory=dict)


@dataclass
class RunMetrics:
    clocks: Dict[str, ClockMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {cid: asdict(m) for cid, m in sorted(self.clocks.items())}


def _signed_dial_delta(displayed: float, civil: float) -> float:
    d = (displayed - civil) % HALF_DAY_MS
    if d > HALF_DAY_MS / 2:
        d -= HALF_DAY_MS
    return d


def metrics_from_trace(events: Iterable[TraceEvent]) -> RunMetrics:
    """Pure fold over trace events; the simulator computes its metrics by
    running this same fold over the trace it emitted."""
    metrics = RunMetrics()
    attn: Dict[str, AttentionState] = {}
    attn_since: Dict[str, int] = {}
    last_t: Dict[str, int] = {}

    def clock(cid: str) -> ClockMetrics:
        if cid not in metrics.clocks:
            metrics.clocks[cid] = ClockMetrics()
            attn[cid] = AttentionState.AWAY
            attn_since[cid] = 0
            last_t[cid] = 0
        return metrics.clocks[cid]

    for ev in events:
        m = clock(ev.clock_id)
        last_t[ev.clock_id] = max(last_t[ev.clock_id], ev.t_ms)
        if ev.kind == "ATTENTION":
            state = attn[ev.clock_id]
            m.dwell_ms[state.value] = m.dwell_ms.get(state.value, 0) \
                + ev.t_ms - attn_since[ev.clock_id]
            attn[ev.clock_id] = AttentionState(ev.payload["state"])
            attn_since[ev.clock_id] = ev.t_ms
        elif ev.kind == "DISPLAY_SAMPLE":
            m.displayed_drift_ms = _signed_dial_delta(
                ev.payload["tod_ms"], ev.payload["civil_tod_ms"])
            if "skew_deg" in ev.payload:
                m.max_hand_skew_deg = max(m.max_hand_skew_deg,
                                          ev.payload["skew_deg"])
        elif ev.kind in ("STEP", "FRAME_RX"):
            for key in ("skew_deg", "skew_before_deg"):
                if key in ev.payload:
                    m.max_hand_skew_deg = max(m.max_hand_skew_deg,
                                              ev.payload[key])
        elif ev.kind == "FRAME_TX":
            if ev.payload.get("dropped"):
                m.frames_dropped += 1
        elif ev.kind == "PRESENCE":
            if ev.payload.get("event") == "SHOWING_ENTER":
                m.mutual_show_count += 1

    for cid, m in metrics.clocks.items():
        state = attn[cid]
        m.dwell_ms[state.value] = m.dwell_ms.get(state.value, 0) \
            + last_t[cid] - attn_since[cid]
    return metrics
