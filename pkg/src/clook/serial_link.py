"""Framed serial protocol for the hour-motor path, plus a seeded lossy
channel model.

Frame layout (bit-exact wire contract):

    0xA5 | type | length | payload[length] | crc8

type: 0x01 STEP_BATCH, 0x02 PING, 0x03 ACK.  crc8 uses polynomial 0x07,
init 0x00, computed over type+length+payload.  Multi-byte integers are
little-endian.  STEP_BATCH payload: direction byte (0x01 CW, 0x00 CCW)
followed by a u16 step count.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .motor import Direction

SYNC = 0xA5
TYPE_STEP_BATCH = 0x01
TYPE_PING = 0x02
TYPE_ACK = 0x03
KNOWN_TYPES = {TYPE_STEP_BATCH, TYPE_PING, TYPE_ACK}
MAX_PAYLOAD = 32

_DIR_BYTE = {Direction.CW: 0x01, Direction.CCW: 0x00}
_BYTE_DIR = {v: k for k, v in _DIR_BYTE.items()}


class OversizePayloadError(ValueError):
    pass


def crc8(data: bytes, poly: int = 0x07, init: int = 0x00) -> int:
    c = init
    for b in data:
        c ^= b
        for _ in range(8):
            c = ((c << 1) ^ poly) & 0xFF if c & 0x80 else (c << 1) & 0xFF
    return c


@dataclass(frozen=True)
class Ping:
    pass


@dataclass(frozen=True)
class Ack:
    pass


@dataclass(frozen=True)
class StepBatch:
    direction: Direction
    count: int

    def __post_init__(self):
        if not 1 <= self.count <= 0xFFFF:
            raise ValueError("count must fit in u16 and be >= 1")


Message = Union[Ping, Ack, StepBatch]


def _body(msg: Message) -> Tuple[int, bytes]:
    if isinstance(msg, Ping):
        return TYPE_PING, b""
    if isinstance(msg, Ack):
        return TYPE_ACK, b""
    if isinstance(msg, StepBatch):
        return TYPE_STEP_BATCH, bytes([_DIR_BYTE[msg.direction]]) + msg.count.to_bytes(2, "little")
    raise TypeError(f"unknown message {msg!r}")


def encode(msg: Message) -> bytes:
    msg_type, payload = _body(msg)
    if len(payload) > MAX_PAYLOAD:
        raise OversizePayloadError(f"payload {len(payload)} > {MAX_PAYLOAD}")
    head = bytes([msg_type, len(payload)]) + payload
    return bytes([SYNC]) + head + bytes([crc8(head)])


def _parse_payload(msg_type: int, payload: bytes) -> Optional[Message]:
    if msg_type == TYPE_PING:
        return Ping()
    if msg_type == TYPE_ACK:
        return Ack()
    if msg_type == TYPE_STEP_BATCH:
        if len(payload) != 3 or payload[0] not in _BYTE_DIR:
            return None
        count = int.from_bytes(payload[1:3], "little")
        if count < 1:
            return None
        return StepBatch(_BYTE_DIR[payload[0]], count)
    return None


@dataclass
class DecodeStats:
    crc_mismatch: int = 0
    truncated: int = 0
    unknown_type: int = 0

    def add(self, other: "DecodeStats"):
        self.crc_mismatch += other.crc_mismatch
        self.truncated += other.truncated
        self.unknown_type += other.unknown_type


def decode(data: bytes) -> Tuple[List[Message], DecodeStats]:
    """Scan a buffer for frames, resynchronizing on garbage.  A frame with a
    bad CRC is rejected and scanning resumes one byte past its sync byte, so
    corruption can never swallow a later valid frame."""
    msgs: List[Message] = []
    stats = DecodeStats()
    i = 0
    n = len(data)
    while i < n:
        if data[i] != SYNC:
            i += 1
            continue
        if i + 3 > n:
            stats.truncated += 1
            break
        msg_type, length = data[i + 1], data[i + 2]
        if length > MAX_PAYLOAD:
            i += 1
            continue
        end = i + 3 + length + 1
        if end > n:
            stats.truncated += 1
            break
        body = data[i + 1:i + 3 + length]
        if crc8(body) != data[end - 1]:
            stats.crc_mismatch += 1
            i += 1
            continue
        msg = _parse_payload(msg_type, bytes(data[i + 3:i + 3 + length]))
        if msg is None:
            stats.unknown_type += 1
        else:
            msgs.append(msg)
        i = end
    return msgs, stats


class FrameDecoder:
    """Streaming decoder: feed arbitrary chunks, collect messages.  Bytes of
    a potentially-incomplete trailing frame are buffered."""

    def __init__(self):
        self._buf = bytearray()
        self.stats = DecodeStats()

    def feed(self, chunk: bytes) -> List[Message]:
        self._buf.extend(chunk)
        msgs: List[Message] = []
        while self._consume_one(msgs):
            pass
        return msgs

    def _consume_one(self, out: List[Message]) -> bool:
        buf = self._buf
        while buf and buf[0] != SYNC:
            buf.pop(0)
        if len(buf) < 4:
            return False
        length = buf[2]
        if length > MAX_PAYLOAD:
            buf.pop(0)
            return True
        end = 3 + length + 1
        if len(buf) < end:
            return False
        body = bytes(buf[1:3 + length])
        if crc8(body) != buf[end - 1]:
            self.stats.crc_mismatch += 1
            buf.pop(0)
            return True
        msg = _parse_payload(buf[1], body[2:])
        if msg is None:
            self.stats.unknown_type += 1
        else:
            out.append(msg)
        del buf[:end]
        return True


@dataclass(frozen=True)
class LinkModel:
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    drop_probability: float = 0.0
    seed: int = 0
    allow_reorder: bool = False

    def __post_init__(self):
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")


class Channel:
    """Seeded lossy/laggy channel.  transmit() returns the delivery time in
    ms, or None if the frame was dropped.  Identical seeds give identical
    schedules.  Unless reordering is enabled, deliveries never overtake."""

    def __init__(self, model: LinkModel):
        self.model = model
        self._rng = random.Random(model.seed)
        self._last_delivery = float("-inf")
        self.sent = 0
        self.dropped = 0

    def transmit(self, frame: bytes, t: float) -> Optional[float]:
        self.sent += 1
        m = self.model
        if m.drop_probability > 0 and self._rng.random() < m.drop_probability:
            self.dropped += 1
            return None
        delay = m.latency_ms + (self._rng.uniform(0, m.jitter_ms) if m.jitter_ms else 0.0)
        delivery = t + delay
        if not m.allow_reorder:
            delivery = max(delivery, self._last_delivery)
        self._last_delivery = max(self._last_delivery, delivery)
        return delivery
