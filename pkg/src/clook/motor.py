"""Two-ring stepper drive emulation: clock geometry, fractional step
planning with carry, and hand-skew measurement."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple

from .timewarp import HALF_DAY_MS

HOUR_MS = 3_600_000
MAX_BATCH = 0xFFFF  # step count travels as u16 on the wire


class RingId(Enum):
    MINUTE = "MINUTE"
    HOUR = "HOUR"


class Direction(Enum):
    CW = "CW"
    CCW = "CCW"


@dataclass(frozen=True)
class GearTrain:
    steps_per_motor_rev: int = 4096  # 28BYJ-48 half-step
    motor_to_ring_ratio: Fraction = Fraction(1)
    step_period_ms: float = 2.0

    def __post_init__(self):
        if self.steps_per_motor_rev <= 0:
            raise ValueError("steps_per_motor_rev must be > 0")
        if self.motor_to_ring_ratio <= 0:
            raise ValueError("motor_to_ring_ratio must be > 0")

    @property
    def steps_per_ring_rev(self) -> Fraction:
        return Fraction(self.steps_per_motor_rev) / self.motor_to_ring_ratio

    @property
    def step_degrees(self) -> float:
        return float(360 / self.steps_per_ring_rev)


@dataclass
class RingState:
    ring_id: RingId
    steps_per_rev: Fraction
    step_position: int = 0  # cumulative, CCW steps subtract

    @property
    def angle(self) -> float:
        return float((self.step_position % self.steps_per_rev) * 360 / self.steps_per_rev)


@dataclass(frozen=True)
class StepCommand:
    motor_id: RingId
    direction: Direction
    step_count: int
    issue_t: int

    def __post_init__(self):
        if self.step_count < 1:
            raise ValueError("step_count must be >= 1")


def target_angles(displayed_tod: float) -> Tuple[float, float]:
    """Standard analog geometry for a 12 h time-of-day in ms."""
    tod = displayed_tod % HALF_DAY_MS
    minute_deg = (tod % HOUR_MS) / HOUR_MS * 360.0
    hour_deg = tod / HALF_DAY_MS * 360.0
    return minute_deg, hour_deg


class RingPlanner:
    """Plans forward-only step batches toward a target angle, carrying the
    fractional remainder so rounding never accumulates drift: the cumulative
    issued count is always round(cumulative exact target)."""

    def __init__(self, gear: GearTrain, ring_id: RingId):
        self.gear = gear
        self.ring_id = ring_id
        self._target = Fraction(0)   # cumulative exact target, in steps
        self._commanded = 0          # cumulative steps issued

    @property
    def commanded(self) -> int:
        return self._commanded

    def target_error_steps(self) -> float:
        return float(self._target - self._commanded)

    def plan(self, target_deg: Fraction, issue_t: int,
             shortest_path: bool = False) -> List[StepCommand]:
        spr = self.gear.steps_per_ring_rev
        pos = Fraction(target_deg) * spr / 360
        delta = (pos - self._target) % spr
        if shortest_path and delta > spr / 2:
            delta -= spr
        self._target += delta
        want = (self._target + Fraction(1, 2)).__floor__()
        steps = want - self._commanded
        if steps == 0:
            return []
        self._commanded = want
        direction = Direction.CW if steps > 0 else Direction.CCW
        count = abs(steps)
        cmds = []
        while count > 0:
            n = min(count, MAX_BATCH)
            cmds.append(StepCommand(self.ring_id, direction, n, issue_t))
            count -= n
        return cmds


class DrivePlanner:
    """Pairs the minute and hour ring planners against one displayed time."""

    def __init__(self, gear: Optional[GearTrain] = None):
        self.gear = gear or GearTrain()
        self.minute = RingPlanner(self.gear, RingId.MINUTE)
        self.hour = RingPlanner(self.gear, RingId.HOUR)

    def plan(self, displayed_tod_ms: int, issue_t: int,
             shortest_path: bool = False) -> List[StepCommand]:
        tod = displayed_tod_ms % HALF_DAY_MS
        minute_deg = Fraction(tod % HOUR_MS, HOUR_MS) * 360
        hour_deg = Fraction(tod, HALF_DAY_MS) * 360
        return (self.minute.plan(minute_deg, issue_t, shortest_path)
                + self.hour.plan(hour_deg, issue_t, shortest_path))


def apply_steps(state: RingState, cmd: StepCommand, *,
                latency_ms: float = 0.0,
                step_period_ms: float = 2.0) -> Tuple[RingState, float]:
    """Advance a ring by a command; returns the new state and the effective
    completion time (issue + link latency + stepping time)."""
    if cmd.motor_id != state.ring_id:
        raise ValueError(f"command for {cmd.motor_id} applied to {state.ring_id}")
    sign = 1 if cmd.direction == Direction.CW else -1
    new = RingState(state.ring_id, state.steps_per_rev,
                    state.step_position + sign * cmd.step_count)
    completion = cmd.issue_t + latency_ms + cmd.step_count * step_period_ms
    return new, completion


def skew_degrees(minute_deg: float, hour_deg: float) -> float:
    """Angular deviation of the hour ring from the position consistent with
    the minute ring (30° per hour sector, minute_deg/12 within it)."""
    r = (hour_deg - minute_deg / 12.0) % 30.0
    return min(r, 30.0 - r)


def hand_skew(minute: RingState, hour: RingState) -> float:
    return skew_degrees(minute.angle, hour.angle)
