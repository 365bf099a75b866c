"""Mutual-gaze telepresence protocol between two paired clocks.

Each side heartbeats GAZE messages while its own viewer is watching.  When
both watching intervals overlap for the configured window, the side with the
lexicographically smaller id proposes a window; the peer confirms with its
civil local time, the proposer confirms back, and both sides show the other's
time for the show duration, then cool down.

Wire encoding: one JSON object per message, e.g.
    {"v":1,"type":"GAZE","seq":12,"watching":true,"since_ms":123456}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

from .attention import AttentionState
from .timewarp import DAY_MS, HALF_DAY_MS

WIRE_VERSION = 1


class PresenceState(Enum):
    IDLE = "IDLE"
    LOCAL_WATCHING = "LOCAL_WATCHING"
    MUTUAL_PENDING = "MUTUAL_PENDING"
    SHOWING = "SHOWING"
    COOLDOWN = "COOLDOWN"


@dataclass(frozen=True)
class Hello:
    id: str
    tz_offset: int


@dataclass(frozen=True)
class Gaze:
    seq: int
    watching: bool
    since_ms: int


@dataclass(frozen=True)
class Propose:
    window_id: int


@dataclass(frozen=True)
class Confirm:
    window_id: int
    local_tod_ms: int


@dataclass(frozen=True)
class ShowAck:
    window_id: int


@dataclass(frozen=True)
class Bye:
    pass


PresenceMessage = Union[Hello, Gaze, Propose, Confirm, ShowAck, Bye]

_WIRE_TYPES = {
    Hello: "HELLO", Gaze: "GAZE", Propose: "PROPOSE",
    Confirm: "CONFIRM", ShowAck: "SHOW_ACK", Bye: "BYE",
}
_TYPE_CLASSES = {v: k for k, v in _WIRE_TYPES.items()}


class WireError(ValueError):
    pass


def encode_message(msg: PresenceMessage) -> str:
    obj = {"v": WIRE_VERSION, "type": _WIRE_TYPES[type(msg)]}
    obj.update(msg.__dict__)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def decode_message(line: str) -> PresenceMessage:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise WireError(f"bad json: {e}") from e
    if not isinstance(obj, dict) or obj.get("v") != WIRE_VERSION:
        raise WireError("missing or unsupported version")
    cls = _TYPE_CLASSES.get(obj.get("type"))
    if cls is None:
        raise WireError(f"unknown message type {obj.get('type')!r}")
    fields = {k: v for k, v in obj.items() if k not in ("v", "type")}
    try:
        return cls(**fields)
    except TypeError as e:
        raise WireError(f"bad fields for {obj['type']}: {e}") from e


def local_civil_tod(tz_offset_minutes: int, utc_now_ms: int) -> int:
    """Timezone-true time-of-day reduced to the 12 h dial."""
    return ((utc_now_ms + tz_offset_minutes * 60_000) % DAY_MS) % HALF_DAY_MS


@dataclass(frozen=True)
class PeerConfig:
    local_id: str
    peer_id: str
    tz_offset_minutes: int = 0
    heartbeat_ms: int = 500
    overlap_window_ms: int = 2000
    show_duration_ms: int = 10_000
    mutual_timeout_ms: int = 3000
    cooldown_ms: int = 5000
    retx_ms: int = 200
    transit_estimate_ms: int = 0

    def __post_init__(self):
        if self.local_id == self.peer_id:
            raise ValueError("local_id and peer_id must differ")
        if not -720 <= self.tz_offset_minutes <= 840:
            raise ValueError("tz_offset_minutes out of range")
        if self.overlap_window_ms < self.heartbeat_ms:
            raise ValueError("overlap window must be >= heartbeat")

    @property
    def is_proposer(self) -> bool:
        return self.local_id < self.peer_id


@dataclass(frozen=True)
class OverrideCommand:
    """Instruction for the warp engine: show remote_tod for duration_ms."""
    remote_tod_ms: int
    duration_ms: int
    window_id: int


@dataclass
class NodeOutput:
    messages: List[PresenceMessage] = field(default_factory=list)
    override: Optional[OverrideCommand] = None
    events: List[Tuple[int, str, dict]] = field(default_factory=list)

    def note(self, t: int, name: str, **payload):
        self.events.append((t, name, payload))


class PresenceNode:
    """Protocol state machine for one clock.  Deterministic and transport
    agnostic: callers feed attention changes, inbound messages and time
    ticks, and forward the returned messages to the peer.

    Overlap is measured on this side's clock; the peer's watching start is
    taken as min(reported since_ms, receipt time), which is exact when both
    sides share a time epoch (simulation, or unix-ms gateways) and degrades
    to receipt time otherwise.
    """

    def __init__(self, config: PeerConfig,
                 civil_tod: Callable[[int], int]):
        self.cfg = config
        self._civil_tod = civil_tod
        self.state = PresenceState.IDLE
        self.watching = False
        self.local_since = 0
        self.peer_watching = False
        self.peer_since = 0
        self._peer_since_reported: Optional[int] = None
        self._seq = 0
        self._last_peer_seq = -1
        self._next_gaze_t: Optional[int] = None
        self._window_counter = 0
        self.window_id: Optional[int] = None
        self._role_proposer = False
        self._deadline: Optional[int] = None
        self._retx_t: Optional[int] = None
        self._my_confirm: Optional[Confirm] = None
        self._confirm_acked = False
        self._pending_propose: Optional[int] = None
        self.show_until: Optional[int] = None
        self.cooldown_until: Optional[int] = None
        self.hello_sent = False
        self.peer_hello: Optional[Hello] = None
        self._next_hello_t: Optional[int] = None
        self.unknown_confirms = 0
        self.mutual_shows = 0

    # -- helpers -------------------------------------------------------

    def _gaze(self, watching: bool, since: int) -> Gaze:
        self._seq += 1
        return Gaze(self._seq, watching, since)

    def _eligible(self, t: int) -> bool:
        if not (self.watching and self.peer_watching):
            return False
        if self.cooldown_until is not None and t < self.cooldown_until:
            return False
        overlap = t - max(self.local_since, self.peer_since)
        return overlap >= self.cfg.overlap_window_ms

    def _eligibility_time(self) -> Optional[int]:
        if not (self.watching and self.peer_watching):
            return None
        t = max(self.local_since, self.peer_since) + self.cfg.overlap_window_ms
        if self.cooldown_until is not None:
            t = max(t, self.cooldown_until)
        return t

    def _clear_window(self):
        self.window_id = None
        self._role_proposer = False
        self._deadline = None
        self._retx_t = None
        self._my_confirm = None
        self._confirm_acked = False

    def _abort_to_base(self, t: int, out: NodeOutput):
        self._clear_window()
        new = PresenceState.LOCAL_WATCHING if self.watching else PresenceState.IDLE
        if new != self.state:
            out.note(t, "STATE", state=new.value)
        self.state = new

    def _enter_showing(self, t: int, peer_tod: int, out: NodeOutput):
        self.state = PresenceState.SHOWING
        self.show_until = t + self.cfg.show_duration_ms
        self.mutual_shows += 1
        out.override = OverrideCommand(
            (peer_tod + self.cfg.transit_estimate_ms) % HALF_DAY_MS,
            self.cfg.show_duration_ms, self.window_id)
        out.note(t, "SHOWING_ENTER", window_id=self.window_id)

    def _send_propose(self, t: int, out: NodeOutput):
        self._window_counter += 1
        self.window_id = self._window_counter
        self._role_proposer = True
        self.state = PresenceState.MUTUAL_PENDING
        self._deadline = t + self.cfg.mutual_timeout_ms
        self._retx_t = t + self.cfg.retx_ms
        out.messages.append(Propose(self.window_id))
        out.note(t, "PROPOSE", window_id=self.window_id)

    def _send_confirm(self, t: int, window_id: int, out: NodeOutput):
        self.window_id = window_id
        self._role_proposer = False
        self.state = PresenceState.MUTUAL_PENDING
        self._deadline = t + self.cfg.mutual_timeout_ms
        self._retx_t = t + self.cfg.retx_ms
        self._my_confirm = Confirm(window_id, self._civil_tod(t))
        out.messages.append(self._my_confirm)
        self._pending_propose = None

    # -- inputs --------------------------------------------------------

    def start(self, t: int) -> NodeOutput:
        out = NodeOutput()
        out.messages.append(Hello(self.cfg.local_id, self.cfg.tz_offset_minutes))
        self.hello_sent = True
        # keep re-introducing ourselves until the peer's HELLO arrives
        self._next_hello_t = t + self.cfg.heartbeat_ms
        return out

    def on_local_attention(self, state: AttentionState, t: int) -> NodeOutput:
        out = NodeOutput()
        now_watching = state == AttentionState.WATCHING
        if now_watching and not self.watching:
            self.watching = True
            self.local_since = t
            self._next_gaze_t = t + self.cfg.heartbeat_ms
            out.messages.append(self._gaze(True, self.local_since))
            if self.state == PresenceState.IDLE:
                self.state = PresenceState.LOCAL_WATCHING
                out.note(t, "STATE", state=self.state.value)
        elif not now_watching and self.watching:
            self.watching = False
            self._next_gaze_t = None
            out.messages.append(self._gaze(False, t))
            if self.state in (PresenceState.LOCAL_WATCHING, PresenceState.MUTUAL_PENDING):
                # abort: mutuality is gone (SHOWING keeps running to expiry)
                self._clear_window()
                self.state = PresenceState.IDLE
                out.note(t, "STATE", state=self.state.value)
        return out

    def on_message(self, msg: PresenceMessage, t: int) -> NodeOutput:
        out = NodeOutput()
        if isinstance(msg, Hello):
            self.peer_hello = msg
            return out
        if isinstance(msg, Gaze):
            self._on_gaze(msg, t, out)
        elif isinstance(msg, Propose):
            self._on_propose(msg, t, out)
        elif isinstance(msg, Confirm):
            self._on_confirm(msg, t, out)
        elif isinstance(msg, ShowAck):
            if self.window_id == msg.window_id:
                self._confirm_acked = True
        elif isinstance(msg, Bye):
            self.peer_watching = False
            self._peer_since_reported = None
        self._check_triggers(t, out)
        return out

    def _on_gaze(self, msg: Gaze, t: int, out: NodeOutput):
        if msg.seq <= self._last_peer_seq:
            return  # duplicate or stale
        self._last_peer_seq = msg.seq
        if msg.watching:
            if not self.peer_watching or self._peer_since_reported != msg.since_ms:
                self.peer_watching = True
                self._peer_since_reported = msg.since_ms
                self.peer_since = min(msg.since_ms, t)
        else:
            self.peer_watching = False
            self._peer_since_reported = None
            if self.state == PresenceState.MUTUAL_PENDING:
                self._abort_to_base(t, out)

    def _on_propose(self, msg: Propose, t: int, out: NodeOutput):
        if self.cfg.is_proposer:
            return  # only the smaller id may propose; ignore rogue proposals
        if self.state == PresenceState.MUTUAL_PENDING and self.window_id == msg.window_id:
            out.messages.append(self._my_confirm)  # duplicate PROPOSE: re-confirm
            return
        if self.state == PresenceState.SHOWING:
            return
        if not self.watching:
            return
        if self._eligible(t):
            self._send_confirm(t, msg.window_id, out)
        else:
            self._pending_propose = msg.window_id  # confirm once eligible

    def _on_confirm(self, msg: Confirm, t: int, out: NodeOutput):
        if msg.window_id != self.window_id:
            self.unknown_confirms += 1
            return
        if self._role_proposer:
            if self.state == PresenceState.MUTUAL_PENDING:
                # peer's CONFIRM + our own = both held; reply and show
                self._my_confirm = Confirm(self.window_id, self._civil_tod(t))
                out.messages.append(self._my_confirm)
                self._retx_t = t + self.cfg.retx_ms
                self._deadline = None
                self._enter_showing(t, msg.local_tod_ms, out)
            elif self.state == PresenceState.SHOWING and not self._confirm_acked:
                out.messages.append(self._my_confirm)  # duplicate: re-send ours
        else:
            if self.state == PresenceState.MUTUAL_PENDING:
                self._deadline = None
                self._retx_t = None
                out.messages.append(ShowAck(self.window_id))
                self._enter_showing(t, msg.local_tod_ms, out)
            elif self.state == PresenceState.SHOWING:
                out.messages.append(ShowAck(self.window_id))

    # -- time ----------------------------------------------------------

    def tick(self, t: int) -> NodeOutput:
        out = NodeOutput()
        if self.state == PresenceState.SHOWING and self.show_until is not None \
                and t >= self.show_until:
            self.show_until = None
            self.cooldown_until = t + self.cfg.cooldown_ms
            self._clear_window()
            self.state = PresenceState.COOLDOWN
            out.note(t, "STATE", state=self.state.value)
        if self.state == PresenceState.COOLDOWN and self.cooldown_until is not None \
                and t >= self.cooldown_until:
            self.state = (PresenceState.LOCAL_WATCHING if self.watching
                          else PresenceState.IDLE)
            out.note(t, "STATE", state=self.state.value)
        if self.state == PresenceState.MUTUAL_PENDING and self._deadline is not None \
                and t >= self._deadline:
            out.note(t, "MUTUAL_TIMEOUT", window_id=self.window_id)
            self._abort_to_base(t, out)
        if self._next_hello_t is not None and t >= self._next_hello_t:
            if self.peer_hello is None:
                out.messages.append(Hello(self.cfg.local_id,
                                          self.cfg.tz_offset_minutes))
                self._next_hello_t = t + self.cfg.heartbeat_ms
            else:
                self._next_hello_t = None
        if self.watching and self._next_gaze_t is not None and t >= self._next_gaze_t:
            out.messages.append(self._gaze(True, self.local_since))
            self._next_gaze_t += self.cfg.heartbeat_ms
        if self._retx_t is not None and t >= self._retx_t:
            if self.state == PresenceState.MUTUAL_PENDING:
                if self._role_proposer:
                    out.messages.append(Propose(self.window_id))
                elif self._my_confirm is not None:
                    out.messages.append(self._my_confirm)
                self._retx_t = t + self.cfg.retx_ms
            elif self.state == PresenceState.SHOWING and self._role_proposer \
                    and not self._confirm_acked and self._my_confirm is not None:
                out.messages.append(self._my_confirm)
                self._retx_t = t + self.cfg.retx_ms
            else:
                self._retx_t = None
        self._check_triggers(t, out)
        return out

    def _check_triggers(self, t: int, out: NodeOutput):
        if self.state != PresenceState.LOCAL_WATCHING or not self._eligible(t):
            return
        if self.cfg.is_proposer:
            self._send_propose(t, out)
        elif self._pending_propose is not None:
            self._send_confirm(t, self._pending_propose, out)

    def next_deadline(self) -> Optional[int]:
        cands = []
        if self._next_hello_t is not None and self.peer_hello is None:
            cands.append(self._next_hello_t)
        if self.watching and self._next_gaze_t is not None:
            cands.append(self._next_gaze_t)
        if self._retx_t is not None:
            cands.append(self._retx_t)
        if self._deadline is not None:
            cands.append(self._deadline)
        if self.show_until is not None:
            cands.append(self.show_until)
        if self.state == PresenceState.COOLDOWN and self.cooldown_until is not None:
            cands.append(self.cooldown_until)
        if self.state == PresenceState.LOCAL_WATCHING:
            et = self._eligibility_time()
            if et is not None and (self.cfg.is_proposer or self._pending_propose is not None):
                cands.append(et)
        return min(cands) if cands else None
