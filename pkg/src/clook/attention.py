"""Face-count classification and debounced attention transitions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Tuple

FACE_COUNT_CAP = 64


class AttentionState(Enum):
    AWAY = "AWAY"
    WATCHING = "WATCHING"
    CONVERSATION = "CONVERSATION"


class OrderingError(ValueError):
    """Observation timestamps went backwards on a single stream."""


@dataclass(frozen=True)
class GazeObservation:
    t: int  # monotonic ms
    face_count: int
    source_id: str = ""

    def __post_init__(self):
        if self.face_count < 0:
            raise ValueError("face_count must be non-negative")
        if self.face_count > FACE_COUNT_CAP:
            raise ValueError(f"face_count exceeds sanity cap {FACE_COUNT_CAP}")


def classify_frame(face_count: int) -> AttentionState:
    """0 faces -> AWAY, 1 -> WATCHING, 2 or more -> CONVERSATION."""
    if face_count < 0:
        raise ValueError("face_count must be non-negative")
    if face_count == 0:
        return AttentionState.AWAY
    if face_count == 1:
        return AttentionState.WATCHING
    return AttentionState.CONVERSATION


Transition = Tuple[int, AttentionState]


class Debouncer:
    """Suppresses attention flicker: a raw classification must persist for
    hold_ms before it becomes a transition.

    A candidate state observed at time t commits at t + hold_ms unless a
    contradicting observation arrives first.  ``pending_deadline`` lets an
    event loop schedule the exact commit instant; ``flush`` commits anything
    whose deadline has passed.
    """

    def __init__(self, hold_ms: int = 500, initial: AttentionState = AttentionState.AWAY):
        if hold_ms < 0:
            raise ValueError("hold_ms must be >= 0")
        self.hold_ms = hold_ms
        self.state = initial
        self._candidate: Optional[AttentionState] = None
        self._candidate_t: int = 0
        self._last_t: Optional[int] = None

    def pending_deadline(self) -> Optional[int]:
        if self._candidate is None:
            return None
        return self._candidate_t + self.hold_ms

    def flush(self, t: int) -> List[Transition]:
        """Commit a pending candidate whose hold period has elapsed by t."""
        out: List[Transition] = []
        deadline = self.pending_deadline()
        if deadline is not None and deadline <= t:
            out.append((deadline, self._candidate))
            self.state = self._candidate
            self._candidate = None
        return out

    def observe(self, t: int, face_count: int) -> List[Transition]:
        if self._last_t is not None and t < self._last_t:
            raise OrderingError(f"observation at {t} after {self._last_t}")
        self._last_t = t
        out = self.flush(t)
        raw = classify_frame(face_count)
        if raw == self.state:
            self._candidate = None
        elif self._candidate != raw:
            self._candidate = raw
            self._candidate_t = t
            out.extend(self.flush(t))  # hold_ms == 0 commits immediately
        return out


def debounce(stream: Iterable[GazeObservation], hold_ms: int) -> List[Transition]:
    """Offline debounce of a time-ordered observation stream.

    A final candidate whose hold period extends past the last observation is
    not emitted (its stability was never established).
    """
    deb = Debouncer(hold_ms)
    out: List[Transition] = []
    for obs in stream:
        out.extend(deb.observe(obs.t, obs.face_count))
    return out
