"""Piecewise-linear warped clock: displayed time runs at an attention-selected
rate, with a temporary override channel for showing a peer's time."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .attention import AttentionState

HALF_DAY_MS = 43_200_000  # 12-hour dial
DAY_MS = 86_400_000

SLEW_LOCK_MS = 500  # within this of civil time, SLEW settles to rate 1.0


class Resync(Enum):
    NONE = "NONE"
    SLEW = "SLEW"
    SNAP = "SNAP"


class MonotonicityError(ValueError):
    """wall_now went backwards relative to the clock's anchor."""


@dataclass(frozen=True)
class WarpPolicy:
    rate_watching: float = 1.0
    rate_away: float = 60.0
    rate_conversation: float = 0.0
    resync: Resync = Resync.NONE
    slew_rate: float = 4.0
    override_duration_ms: int = 10_000

    def __post_init__(self):
        if self.rate_watching <= 0:
            raise ValueError("rate_watching must be > 0")
        if self.rate_away < 0 or self.rate_conversation < 0:
            raise ValueError("rates must be >= 0")
        if self.resync == Resync.SLEW and self.slew_rate < 1:
            raise ValueError("SLEW rate must be >= 1")
        if self.override_duration_ms < 0:
            raise ValueError("override_duration_ms must be >= 0")

    def rate_for(self, state: AttentionState) -> float:
        if state == AttentionState.WATCHING:
            return self.rate_watching
        if state == AttentionState.AWAY:
            return self.rate_away
        return self.rate_conversation


@dataclass
class Override:
    remote_tod: float  # time-of-day ms on the 12 h dial
    applied_at: int
    expires_at: int


@dataclass
class WarpedClock:
    """Displayed time anchored at (wall_anchor, displayed_anchor), advancing
    at current_rate.  Transitions re-anchor so displayed time is continuous.
    An override replaces the *display* only; the warped trajectory keeps
    running underneath and is resumed exactly on expiry.
    """

    policy: WarpPolicy = field(default_factory=WarpPolicy)
    wall_anchor: int = 0
    displayed_anchor: float = 0.0
    attention: AttentionState = AttentionState.AWAY
    current_rate: float = field(default=None)  # type: ignore[assignment]
    override: Optional[Override] = None
    _snap_pending: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.displayed_anchor %= HALF_DAY_MS
        if self.current_rate is None:
            self.current_rate = self.policy.rate_for(self.attention)

    def _check(self, wall_now: int):
        if wall_now < self.wall_anchor:
            raise MonotonicityError(
                f"wall_now {wall_now} precedes anchor {self.wall_anchor}")

    def underlying(self, wall_now: int) -> float:
        """Warped trajectory value, ignoring any override."""
        self._check(wall_now)
        return (self.displayed_anchor
                + self.current_rate * (wall_now - self.wall_anchor)) % HALF_DAY_MS

    def advance(self, wall_now: int) -> float:
        """Displayed time-of-day ms at wall_now.  Does not mutate state."""
        self._check(wall_now)
        ov = self.override
        if ov is not None and wall_now < ov.expires_at:
            return (ov.remote_tod + (wall_now - ov.applied_at)) % HALF_DAY_MS
        return self.underlying(wall_now)

    def override_active(self, wall_now: int) -> bool:
        return self.override is not None and wall_now < self.override.expires_at

    def set_attention(self, state: AttentionState, wall_now: int) -> None:
        # Re-anchor from the underlying trajectory, not the override display,
        # so an override never perturbs the warped timeline.
        self.displayed_anchor = self.underlying(wall_now)
        self.wall_anchor = wall_now
        if state == AttentionState.WATCHING and self.attention != AttentionState.WATCHING:
            self._snap_pending = self.policy.resync == Resync.SNAP
        self.attention = state
        self.current_rate = self.policy.rate_for(state)

    def apply_override(self, remote_tod: float, wall_now: int,
                       duration_ms: Optional[int] = None) -> None:
        """Show remote_tod advancing at rate 1.  Re-application restarts the
        timer."""
        self._check(wall_now)
        if duration_ms is None:
            duration_ms = self.policy.override_duration_ms
        self.override = Override(remote_tod % HALF_DAY_MS, wall_now,
                                 wall_now + duration_ms)

    def clear_expired_override(self, wall_now: int) -> bool:
        if self.override is not None and wall_now >= self.override.expires_at:
            self.override = None
            return True
        return False

    def resync_tick(self, wall_civil_tod: int, wall_now: int) -> None:
        """Pull displayed time back toward civil time while being watched.

        SNAP jumps on WATCHING entry; SLEW runs fast (or slow, if the display
        is ahead) until within SLEW_LOCK_MS, then locks to rate 1.
        """
        if self.policy.resync == Resync.NONE:
            raise ValueError("resync_tick requires a SLEW or SNAP policy")
        if self.attention != AttentionState.WATCHING:
            return
        if self.policy.resync == Resync.SNAP:
            if self._snap_pending:
                self.displayed_anchor = wall_civil_tod % HALF_DAY_MS
                self.wall_anchor = wall_now
                self._snap_pending = False
            return
        # SLEW: re-anchor, then pick a rate from the signed dial gap
        self.displayed_anchor = self.underlying(wall_now)
        self.wall_anchor = wall_now
        gap = (wall_civil_tod - self.displayed_anchor) % HALF_DAY_MS
        if gap > HALF_DAY_MS / 2:
            gap -= HALF_DAY_MS
        if abs(gap) < SLEW_LOCK_MS:
            self.displayed_anchor = wall_civil_tod % HALF_DAY_MS
            self.current_rate = 1.0
        elif gap > 0:
            self.current_rate = self.policy.slew_rate
        else:
            self.current_rate = 1.0 / self.policy.slew_rate

    def mode(self, wall_now: int) -> str:
        """Display mode label: NORMAL / FAST / FROZEN / REMOTE."""
        if self.override_active(wall_now):
            return "REMOTE"
        if self.attention == AttentionState.WATCHING:
            return "NORMAL"
        if self.attention == AttentionState.AWAY:
            return "FAST"
        return "FROZEN"
