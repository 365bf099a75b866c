"""Deterministic scenario runner (event-driven) and the dense fixed-step
oracle used to cross-check it."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .attention import AttentionState, Debouncer, classify_frame
from .motor import (DrivePlanner, RingId, RingState, StepCommand, apply_steps,
                    skew_degrees)
from .presence import (NodeOutput, PeerConfig, PresenceNode, decode_message,
                       encode_message, local_civil_tod)
from .scenario import (ClockMetrics, RunMetrics, Scenario, SimConfig,
                       TraceEvent, metrics_from_trace)
from .serial_link import Channel, FrameDecoder, LinkModel, StepBatch, encode
from .timewarp import HALF_DAY_MS, Resync, WarpedClock


class _ClockRt:
    """Per-clock runtime state inside a simulation."""

    def __init__(self, spec, config: SimConfig, scenario: Scenario,
                 serial_seed: int):
        self.id = spec.id
        self.tz = spec.tz_offset_minutes
        policy = spec.policy if spec.policy is not None else config.warp_policy
        self.utc_start = scenario.utc_start_ms
        civil0 = local_civil_tod(self.tz, self.utc_start)
        self.engine = WarpedClock(policy=policy, wall_anchor=0,
                                  displayed_anchor=civil0)
        self.debouncer = Debouncer(config.hold_ms)
        gear = config.gear_train
        self.planner = DrivePlanner(gear)
        spr = gear.steps_per_ring_rev
        self.minute_ring = RingState(RingId.MINUTE, spr)
        self.hour_ring = RingState(RingId.HOUR, spr)
        link = scenario.link if scenario.link is not None else config.link
        self.serial = Channel(LinkModel(
            latency_ms=link.latency_ms, jitter_ms=link.jitter_ms,
            drop_probability=link.drop_probability,
            seed=link.seed ^ serial_seed, allow_reorder=link.allow_reorder))
        self.hour_decoder = FrameDecoder()
        self.node: Optional[PresenceNode] = None
        self.peer_id: Optional[str] = None
        self.node_tick_at: Optional[int] = None
        self._override_seen = False
        self.deb_deadline_at: Optional[int] = None

    def civil_tod(self, t: int) -> int:
        return local_civil_tod(self.tz, self.utc_start + t)


class Simulation:
    def __init__(self, scenario: Scenario, config: Optional[SimConfig] = None,
                 seed: Optional[int] = None):
        self.scenario = scenario
        self.config = config or SimConfig()
        self.seed = scenario.seed if seed is None else seed
        self.trace: List[TraceEvent] = []
        self._heap: List[tuple] = []
        self._seq = itertools.count()
        self.clocks: Dict[str, _ClockRt] = {}
        for i, spec in enumerate(scenario.clocks):
            self.clocks[spec.id] = _ClockRt(spec, self.config, scenario,
                                            serial_seed=self.seed * 1000 + i)
        self._net: Dict[Tuple[str, str], Channel] = {}
        if len(scenario.clocks) == 2:
            a, b = scenario.clocks[0].id, scenario.clocks[1].id
            net = scenario.network if scenario.network is not None \
                else self.config.network
            for j, (src, dst) in enumerate(((a, b), (b, a))):
                self._net[(src, dst)] = Channel(LinkModel(
                    latency_ms=net.latency_ms, jitter_ms=net.jitter_ms,
                    drop_probability=net.drop_probability,
                    seed=net.seed ^ (self.seed * 1000 + 101 + j),
                    allow_reorder=net.allow_reorder))
            peer_overrides = dict(self.config.peer or {})
            for src, dst in ((a, b), (b, a)):
                rt = self.clocks[src]
                rt.peer_id = dst
                cfg = PeerConfig(local_id=src, peer_id=dst,
                                 tz_offset_minutes=rt.tz, **peer_overrides)
                rt.node = PresenceNode(cfg, rt.civil_tod)

    # -- scheduling ----------------------------------------------------

    def _push(self, t: int, kind: str, data=None):
        heapq.heappush(self._heap, (t, next(self._seq), kind, data))

    def _emit(self, t: int, cid: str, kind: str, payload: dict):
        self.trace.append(TraceEvent(t, cid, kind, payload))

    # -- presence plumbing ----------------------------------------------

    def _dispatch_node_output(self, rt: _ClockRt, out: NodeOutput, t: int):
        for ev_t, name, payload in out.events:
            self._emit(ev_t, rt.id, "PRESENCE", {"event": name, **payload})
        for msg in out.messages:
            line = encode_message(msg)
            chan = self._net[(rt.id, rt.peer_id)]
            delivery = chan.transmit(line.encode(), t)
            self._emit(t, rt.id, "PRESENCE", {
                "dir": "tx", "msg_type": type(msg).__name__.upper(),
                "dropped": delivery is None})
            if delivery is not None:
                self._push(int(round(delivery)), "net", (rt.peer_id, line))
        if out.override is not None:
            ov = out.override
            rt.engine.apply_override(ov.remote_tod_ms, t, ov.duration_ms)
            self._emit(t, rt.id, "OVERRIDE", {
                "remote_tod_ms": ov.remote_tod_ms,
                "duration_ms": ov.duration_ms, "window_id": ov.window_id})
            self._push(t + ov.duration_ms, "ovr_end", (rt.id, t + ov.duration_ms))
        self._reschedule_node(rt, t)

    def _reschedule_node(self, rt: _ClockRt, t: int):
        if rt.node is None:
            return
        nd = rt.node.next_deadline()
        if nd is None:
            return
        nd = max(nd, t)
        if rt.node_tick_at is None or nd < rt.node_tick_at:
            rt.node_tick_at = nd
            self._push(nd, "ptick", rt.id)

    # -- attention ------------------------------------------------------

    def _apply_transitions(self, rt: _ClockRt, transitions, t: int):
        for tt, state in transitions:
            rt.engine.set_attention(state, tt)
            if rt.engine.policy.resync != Resync.NONE:
                rt.engine.resync_tick(rt.civil_tod(tt), tt)
            self._emit(tt, rt.id, "ATTENTION", {"state": state.value})
            if rt.node is not None:
                out = rt.node.on_local_attention(state, tt)
                self._dispatch_node_output(rt, out, tt)
        dl = rt.debouncer.pending_deadline()
        if dl is not None and dl != rt.deb_deadline_at:
            rt.deb_deadline_at = dl
            self._push(dl, "deb", rt.id)

    # -- motors ----------------------------------------------------------

    def _motor_tick(self, rt: _ClockRt, t: int):
        tod = rt.engine.advance(t)
        override_now = rt.engine.override_active(t)
        shortest = override_now != rt._override_seen
        rt._override_seen = override_now
        cmds = rt.planner.plan(int(round(tod)), t, shortest_path=shortest)
        gear = self.config.gear_train
        for cmd in cmds:
            if cmd.motor_id == RingId.MINUTE:
                rt.minute_ring, completion = apply_steps(
                    rt.minute_ring, cmd, step_period_ms=gear.step_period_ms)
                skew = skew_degrees(rt.minute_ring.angle, rt.hour_ring.angle)
                self._emit(t, rt.id, "STEP", {
                    "ring": "MINUTE", "dir": cmd.direction.value,
                    "steps": cmd.step_count, "completion_ms": completion,
                    "angle_deg": rt.minute_ring.angle, "skew_deg": skew})
            else:
                frame = encode(StepBatch(cmd.direction, cmd.step_count))
                delivery = self.serial_transmit(rt, frame, t)
                self._emit(t, rt.id, "FRAME_TX", {
                    "steps": cmd.step_count, "dir": cmd.direction.value,
                    "dropped": delivery is None,
                    "deliver_ms": None if delivery is None else delivery})

    def serial_transmit(self, rt: _ClockRt, frame: bytes, t: int) -> Optional[int]:
        delivery = rt.serial.transmit(frame, t)
        if delivery is None:
            return None
        delivery = int(round(delivery))
        self._push(delivery, "frame", (rt.id, frame))
        return delivery

    def _frame_delivery(self, rt: _ClockRt, frame: bytes, t: int):
        msgs = rt.hour_decoder.feed(frame)
        gear = self.config.gear_train
        for msg in msgs:
            if not isinstance(msg, StepBatch):
                continue
            skew_before = skew_degrees(rt.minute_ring.angle, rt.hour_ring.angle)
            cmd = StepCommand(RingId.HOUR, msg.direction, msg.count, t)
            rt.hour_ring, completion = apply_steps(
                rt.hour_ring, cmd, step_period_ms=gear.step_period_ms)
            skew = skew_degrees(rt.minute_ring.angle, rt.hour_ring.angle)
            self._emit(t, rt.id, "FRAME_RX", {
                "ring": "HOUR", "dir": msg.direction.value,
                "steps": msg.count, "completion_ms": completion,
                "angle_deg": rt.hour_ring.angle,
                "skew_before_deg": skew_before, "skew_deg": skew})

    # -- samples ---------------------------------------------------------

    def _sample(self, rt: _ClockRt, t: int):
        rt.engine.clear_expired_override(t)
        if rt.engine.policy.resync != Resync.NONE:
            rt.engine.resync_tick(rt.civil_tod(t), t)
        tod = rt.engine.advance(t)
        skew = skew_degrees(rt.minute_ring.angle, rt.hour_ring.angle)
        self._emit(t, rt.id, "DISPLAY_SAMPLE", {
            "tod_ms": tod, "civil_tod_ms": rt.civil_tod(t),
            "mode": rt.engine.mode(t), "skew_deg": skew})

    # -- main loop --------------------------------------------------------

    def run(self) -> Tuple[List[TraceEvent], RunMetrics]:
        scen = self.scenario
        end = scen.end_ms
        for ev in scen.events:
            self._push(ev.t_ms, "obs", (ev.clock_id, ev.face_count))
        sample_ms = self.config.display_sample_ms
        sample_ts = sorted({0, end} | set(range(sample_ms, end, sample_ms)))
        for st in sample_ts:
            self._push(st, "sample", None)
        if self.config.motors_enabled and self.config.motor_update_ms > 0:
            t = 0
            while t <= end:
                self._push(t, "motor", None)
                t += self.config.motor_update_ms
        for rt in self.clocks.values():
            if rt.node is not None:
                self._dispatch_node_output(rt, rt.node.start(0), 0)

        while self._heap:
            t, _, kind, data = heapq.heappop(self._heap)
            if t > end:
                break
            if kind == "obs":
                cid, fc = data
                rt = self.clocks[cid]
                transitions = rt.debouncer.observe(t, fc)
                self._apply_transitions(rt, transitions, t)
            elif kind == "deb":
                rt = self.clocks[data]
                if rt.deb_deadline_at == t:
                    rt.deb_deadline_at = None
                transitions = rt.debouncer.flush(t)
                self._apply_transitions(rt, transitions, t)
            elif kind == "sample":
                for rt in self.clocks.values():
                    self._sample(rt, t)
            elif kind == "motor":
                for rt in self.clocks.values():
                    self._motor_tick(rt, t)
            elif kind == "frame":
                cid, frame = data
                self._frame_delivery(self.clocks[cid], frame, t)
            elif kind == "net":
                cid, line = data
                rt = self.clocks[cid]
                msg = decode_message(line)
                self._emit(t, cid, "PRESENCE", {
                    "dir": "rx", "msg_type": type(msg).__name__.upper()})
                out = rt.node.on_message(msg, t)
                self._dispatch_node_output(rt, out, t)
            elif kind == "ptick":
                rt = self.clocks[data]
                rt.node_tick_at = None
                out = rt.node.tick(t)
                self._dispatch_node_output(rt, out, t)
            elif kind == "ovr_end":
                cid, expires = data
                rt = self.clocks[cid]
                if rt.engine.clear_expired_override(t):
                    self._emit(t, cid, "OVERRIDE", {"event": "expired"})

        self.trace.sort(key=lambda ev: ev.t_ms)
        return self.trace, metrics_from_trace(self.trace)


def run(scenario: Scenario, config: Optional[SimConfig] = None,
        seed: Optional[int] = None) -> Tuple[List[TraceEvent], RunMetrics]:
    return Simulation(scenario, config, seed).run()


# -- dense oracle -----------------------------------------------------------

def _oracle_transitions(obs: List[Tuple[int, int]], hold_ms: int,
                        end_ms: int) -> List[Tuple[int, AttentionState]]:
    """Debounce by walking raw classification runs: a run differing from the
    current state commits hold_ms after it starts, if it lasts that long."""
    raw: List[Tuple[int, AttentionState]] = []
    for t, fc in obs:
        s = classify_frame(fc)
        if not raw or raw[-1][1] != s:
            raw.append((t, s))
    cur = AttentionState.AWAY
    out = []
    for i, (t, s) in enumerate(raw):
        run_end = raw[i + 1][0] if i + 1 < len(raw) else None
        if s == cur:
            continue
        commit = t + hold_ms
        if (run_end is None or run_end - t >= hold_ms) and commit <= end_ms:
            out.append((commit, s))
            cur = s
    return out


def dense_oracle(scenario: Scenario, config: Optional[SimConfig] = None
                 ) -> Dict[str, dict]:
    """Brute-force 1 ms fixed-step re-simulation of displayed time.

    Test-only cross-check; supports scenarios without presence interactions
    (single clock) and resync NONE.
    """
    config = config or SimConfig()
    if len(scenario.clocks) != 1:
        raise ValueError("dense oracle supports single-clock scenarios only")
    end = scenario.end_ms
    if end > 86_400_000:
        raise ValueError("oracle limited to 24 h of simulated time")
    results: Dict[str, dict] = {}
    for spec in scenario.clocks:
        policy = spec.policy if spec.policy is not None else config.warp_policy
        if policy.resync != Resync.NONE:
            raise ValueError("oracle requires resync NONE")
        obs = [(e.t_ms, e.face_count) for e in scenario.events
               if e.clock_id == spec.id]
        transitions = _oracle_transitions(obs, config.hold_ms, end)
        rates = np.empty(end, dtype=np.float64)
        cur_rate = policy.rate_for(AttentionState.AWAY)
        prev_t = 0
        for tt, state in transitions:
            rates[prev_t:tt] = cur_rate
            cur_rate = policy.rate_for(state)
            prev_t = tt
        rates[prev_t:end] = cur_rate
        anchor = float(local_civil_tod(spec.tz_offset_minutes,
                                       scenario.utc_start_ms))
        displayed = np.empty(end + 1, dtype=np.float64)
        displayed[0] = anchor
        np.cumsum(rates, out=displayed[1:])
        displayed[1:] += anchor
        sample_ts = list(range(0, end + 1, config.display_sample_ms))
        if sample_ts[-1] != end:
            sample_ts.append(end)
        samples = [(int(t), float(displayed[t] % HALF_DAY_MS))
                   for t in sample_ts]
        civil_end = local_civil_tod(spec.tz_offset_minutes,
                                    scenario.utc_start_ms + end)
        drift = (samples[-1][1] - civil_end) % HALF_DAY_MS
        if drift > HALF_DAY_MS / 2:
            drift -= HALF_DAY_MS
        results[spec.id] = {"samples": samples, "drift_ms": drift,
                            "transitions": transitions}
    return results


def replay_samples(trace: List[TraceEvent]) -> List[TraceEvent]:
    """DISPLAY_SAMPLE events of a trace, in order (replay closure)."""
    return [ev for ev in trace if ev.kind == "DISPLAY_SAMPLE"]
