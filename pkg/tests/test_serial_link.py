import random

import pytest
from hypothesis import given, strategies as st

from clook.motor import Direction
from clook.serial_link import (Ack, Channel, FrameDecoder, LinkModel, Ping,
                               StepBatch, OversizePayloadError, crc8, decode,
                               encode)


def test_ping_frame_layout():
    assert encode(Ping()) == bytes([0xA5, 0x02, 0x00, crc8(bytes([0x02, 0x00]))])


def test_step_batch_frame_layout():
    f = encode(StepBatch(Direction.CW, 1024))
    assert f[:3] == bytes([0xA5, 0x01, 0x03])
    assert f[3:6] == bytes([0x01, 0x00, 0x04])  # dir=CW, count=1024 LE
    assert f[6] == crc8(f[1:6])


def test_round_trip_basic():
    for msg in (Ping(), Ack(), StepBatch(Direction.CCW, 1),
                StepBatch(Direction.CW, 0xFFFF)):
        msgs, stats = decode(encode(msg))
        assert msgs == [msg]
        assert (stats.crc_mismatch, stats.truncated, stats.unknown_type) == (0, 0, 0)


def test_round_trip_10k_random_messages():
    rng = random.Random(42)
    batch = []
    for _ in range(10_000):
        kind = rng.randrange(3)
        if kind == 0:
            batch.append(Ping())
        elif kind == 1:
            batch.append(Ack())
        else:
            batch.append(StepBatch(rng.choice([Direction.CW, Direction.CCW]),
                                   rng.randint(1, 0xFFFF)))
    blob = b"".join(encode(m) for m in batch)
    msgs, stats = decode(blob)
    assert msgs == batch
    assert stats.crc_mismatch == 0


def test_resync_after_noise_prefix():
    f = bytes([0x13, 0x37, 0x00]) + encode(Ping())
    msgs, _ = decode(f)
    assert msgs == [Ping()]


def test_every_single_bit_flip_rejected():
    ref = encode(StepBatch(Direction.CW, 1024))
    for byte_i in range(len(ref)):
        for bit in range(8):
            corrupted = bytearray(ref)
            corrupted[byte_i] ^= 1 << bit
            msgs, _ = decode(bytes(corrupted))
            assert msgs != [StepBatch(Direction.CW, 1024)], \
                f"flip at byte {byte_i} bit {bit} went undetected"
            assert msgs == [], f"flip at byte {byte_i} bit {bit} decoded {msgs}"


def test_empty_input():
    msgs, stats = decode(b"")
    assert msgs == []
    assert stats.truncated == 0 and stats.crc_mismatch == 0


def test_truncated_frame_counted():
    f = encode(StepBatch(Direction.CW, 5))[:-2]
    msgs, stats = decode(f)
    assert msgs == []
    assert stats.truncated == 1


def test_corrupt_frame_does_not_swallow_next():
    good = encode(Ping())
    bad = bytearray(encode(Ack()))
    bad[-1] ^= 0xFF
    msgs, stats = decode(bytes(bad) + good)
    assert msgs == [Ping()]
    assert stats.crc_mismatch == 1


def test_crc8_known_vector():
    # CRC-8 poly 0x07, init 0x00 ("CRC-8/SMBUS") check value
    assert crc8(b"123456789") == 0xF4


@given(st.binary(max_size=4096))
def test_decoder_never_crashes_on_garbage(data):
    decode(data)


def test_streaming_decoder_reassembles_split_frames():
    frames = [encode(Ping()), encode(StepBatch(Direction.CW, 300)), encode(Ack())]
    blob = b"\x99" + b"".join(frames) + b"\xa5\x01"  # noise + trailing partial
    dec = FrameDecoder()
    got = []
    for i in range(0, len(blob), 3):
        got.extend(dec.feed(blob[i:i + 3]))
    assert got == [Ping(), StepBatch(Direction.CW, 300), Ack()]


def test_channel_fixed_latency():
    ch = Channel(LinkModel(latency_ms=200))
    assert ch.transmit(b"x", 1000) == 1200


def test_channel_drop_all():
    ch = Channel(LinkModel(drop_probability=1.0))
    assert all(ch.transmit(b"x", t) is None for t in range(10))
    assert ch.dropped == 10


def test_channel_deterministic_given_seed():
    def schedule():
        ch = Channel(LinkModel(latency_ms=50, jitter_ms=30,
                               drop_probability=0.2, seed=7))
        return [ch.transmit(b"x", t * 10) for t in range(200)]
    assert schedule() == schedule()


def test_channel_in_order_by_default():
    ch = Channel(LinkModel(latency_ms=10, jitter_ms=200, seed=3))
    deliveries = [d for d in (ch.transmit(b"x", t) for t in range(0, 1000, 10))
                  if d is not None]
    assert deliveries == sorted(deliveries)


def test_channel_reordering_possible_when_enabled():
    ch = Channel(LinkModel(latency_ms=10, jitter_ms=500, seed=3,
                           allow_reorder=True))
    deliveries = [ch.transmit(b"x", t) for t in range(0, 1000, 10)]
    assert deliveries != sorted(deliveries)
