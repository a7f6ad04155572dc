"""Congestion-aware round planning."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

from telcofed.errors import TelcoFedError

if TYPE_CHECKING:
    from telcofed.federation.aggregation import GlobalModel


class SchedulingError(TelcoFedError, ValueError):
    pass


@dataclass(frozen=True)
class CongestionWindow:
    start: int
    end: int
    multiplier: float

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError(f"congestion window [{self.start}, {self.end}) is empty")
        if self.multiplier < 1:
            raise ValueError("latency multiplier must be >= 1")


@dataclass(frozen=True)
class CongestionSchedule:
    """Sorted, non-overlapping windows; time outside every window is off-peak."""

    windows: tuple[CongestionWindow, ...] = ()

    def __post_init__(self) -> None:
        ws = tuple(w if isinstance(w, CongestionWindow) else CongestionWindow(*w) for w in self.windows)
        for a, b in zip(ws, ws[1:]):
            if b.start < a.end:
                raise ValueError("congestion windows must be sorted and non-overlapping")
        object.__setattr__(self, "windows", ws)

    @classmethod
    def of(cls, windows: Iterable[tuple[int, int, float]]) -> CongestionSchedule:
        return cls(tuple(CongestionWindow(*w) for w in windows))

    def multiplier_at(self, t: int) -> float:
        for w in self.windows:
            if w.start <= t < w.end:
                return w.multiplier
        return 1.0

    def next_off_peak(self, t: int) -> int:
        """Earliest time ``>= t`` whose multiplier is 1."""
        for w in self.windows:
            if w.start <= t < w.end and w.multiplier > 1:
                t = w.end
        return t


@dataclass(frozen=True)
class RoundConfig:
    clip: float = 1.0
    sigma: float = 0.0
    masking: bool = True
    deadline_ms: int = 60_000
    lookahead_ms: int = 3_600_000
    local_epochs: int = 10
    lr: float = 0.2

    def __post_init__(self) -> None:
        if self.clip <= 0:
            raise ValueError("clip bound must be positive")
        if self.sigma < 0:
            raise ValueError("noise multiplier must be >= 0")
        if self.deadline_ms <= 0:
            raise ValueError("deadline must be positive")


@dataclass(frozen=True)
class RoundPlan:
    round_id: int
    base_version: int
    participants: tuple[str, ...]
    start: int
    deadline: int
    clip: float
    sigma: float
    masking: bool
    local_epochs: int = 10
    lr: float = 0.2
    weighting: str = "by-sample-count"

    def __post_init__(self) -> None:
        if not self.participants:
            raise SchedulingError("a round needs at least one participant")
        if self.masking and len(self.participants) < 2:
            raise SchedulingError("masking requires at least two participants")


def plan_round(
    model: GlobalModel,
    eligible: Sequence[str],
    schedule: CongestionSchedule,
    now: int,
    cfg: RoundConfig,
    round_id: int | None = None,
    operator_schedules: Mapping[str, CongestionSchedule] | None = None,
) -> RoundPlan:
    """Start at the first off-peak instant and drop operators congested at that instant."""
    if not eligible:
        raise SchedulingError("no eligible operators")
    start = schedule.next_off_peak(now)
    if start - now > cfg.lookahead_ms:
        raise SchedulingError(
            f"no off-peak window within {cfg.lookahead_ms} ms of {now} (next at {start})"
        )
    operator_schedules = operator_schedules or {}
    participants = tuple(
        op
        for op in eligible
        if operator_schedules.get(op, CongestionSchedule()).multiplier_at(start) == 1.0
    )
    if not participants:
        raise SchedulingError(f"every eligible operator is congested at {start}")
    if cfg.masking and len(participants) < 2:
        raise SchedulingError("masking requires at least two uncongested participants")
    return RoundPlan(
        round_id=round_id if round_id is not None else model.version + 1,
        base_version=model.version,
        participants=participants,
        start=start,
        deadline=start + cfg.deadline_ms,
        clip=cfg.clip,
        sigma=cfg.sigma,
        masking=cfg.masking,
        local_epochs=cfg.local_epochs,
        lr=cfg.lr,
    )


__all__ = [
    "CongestionSchedule",
    "CongestionWindow",
    "RoundConfig",
    "RoundPlan",
    "SchedulingError",
    "plan_round",
]
