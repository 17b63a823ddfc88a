"""QoE scoring and the rule-based adaptive bitrate controller.

The session score combines a per-frame quality term, a buffer-queue
penalty and a quality-switching penalty:

    score = sum q(R_i) - mu * sum K_i - sum |q(R_{i+1}) - q(R_i)|

with q(i) = 25 - 5i by default.  Higher is better under this convention;
the controller itself is a deterministic rule machine and never solves
the optimization online.  Three mechanisms drive it: pressure-driven
level increases, probational quality-improvement attempts, and a failure
memory that blocks recently unsuccessful attempts.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

__all__ = [
    "QoEParams",
    "SessionRecord",
    "SessionLog",
    "ControllerConfig",
    "QueueController",
    "evaluate_qoe",
    "default_quality_fn",
]


def default_quality_fn(level: int) -> float:
    return 25.0 - 5.0 * level


@dataclass
class QoEParams:
    mu: float = 0.5
    quality_fn: Callable[[int], float] = default_quality_fn


@dataclass
class SessionRecord:
    frame: int
    level: int
    queue: int
    nbytes: int = 0
    timestamp: float = 0.0
    action: str = "hold"  # hold | up | attempt | rollback (not exported to CSV)


@dataclass
class SessionLog:
    records: List[SessionRecord] = field(default_factory=list)

    def append(self, rec: SessionRecord) -> None:
        self.records.append(rec)

    def levels(self) -> List[int]:
        return [r.level for r in self.records]

    def queues(self) -> List[int]:
        return [r.queue for r in self.records]

    def to_csv(self) -> str:
        lines = ["frame,level,queue,bytes,timestamp"]
        for r in self.records:
            lines.append(f"{r.frame},{r.level},{r.queue},{r.nbytes},{r.timestamp:.3f}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def evaluate_qoe(log: SessionLog, params: Optional[QoEParams] = None) -> float:
    """Session score per the objective above; higher is better."""
    if not log.records:
        raise ValueError("session log is empty")
    params = params or QoEParams()
    q = params.quality_fn
    levels = log.levels()
    quality = sum(q(l) for l in levels)
    queue_penalty = params.mu * sum(log.queues())
    switch_penalty = sum(abs(q(b) - q(a)) for a, b in zip(levels, levels[1:]))
    return quality - queue_penalty - switch_penalty


@dataclass(frozen=True)
class ControllerConfig:
    """Thresholds and windows of the rule machine (all in frames)."""

    k_high: int = 5
    k_low: int = 1
    stable_window: int = 10
    probation_window: int = 10
    cooldown: int = 5
    failed_memory: int = 30
    # Queue trend counts as growing when the fitted slope over the history
    # window reaches this many frames per frame.
    growth_slope: float = 0.5

    def __post_init__(self):
        if min(self.k_high, self.k_low, self.stable_window, self.probation_window,
               self.cooldown, self.failed_memory) <= 0:
            raise ValueError("all controller parameters must be positive")
        if self.k_low >= self.k_high:
            raise ValueError("k_low must be below k_high")


def _slope(samples) -> float:
    """Least-squares slope of queue length vs frame index."""
    n = len(samples)
    if n < 2:
        return 0.0
    mean_x = (n - 1) / 2.0
    mean_y = sum(samples) / n
    num = sum((i - mean_x) * (y - mean_y) for i, y in enumerate(samples))
    den = sum((i - mean_x) ** 2 for i in range(n))
    return num / den


class QueueController:
    """Deterministic per-frame level selector driven by queue observations.

    Moves at most one ladder step per frame.  Pressure (queue above
    k_high, or a growing trend) raises the level after the cooldown;
    sustained low queues trigger a probational attempt at the next finer
    level, rolled back and remembered as failed if the queue blows up
    within the probation window.
    """

    def __init__(self, ladder_size: int, config: Optional[ControllerConfig] = None,
                 initial_level: int = 0):
        if ladder_size < 1:
            raise ValueError("ladder must have at least one level")
        self.config = config or ControllerConfig()
        self.ladder_size = ladder_size
        self.level = max(0, min(initial_level, ladder_size - 1))
        self.frame = 0
        self.frames_since_switch = self.config.cooldown  # allow an immediate first move
        self.history = deque(maxlen=self.config.stable_window)
        self.stable_count = 0
        self.in_probation = False
        self.probation_frames = 0
        self.pre_attempt_level = 0
        self.failed_at = {}  # level -> frame index of last failed attempt
        self.last_action = "hold"

    def _failed_recently(self, level: int) -> bool:
        stamp = self.failed_at.get(level)
        return stamp is not None and self.frame - stamp < self.config.failed_memory

    def step(self, observed_queue: int) -> int:
        """Consume one queue observation, return the level for the next frame."""
        if observed_queue < 0:
            raise ValueError("queue length cannot be negative")
        cfg = self.config
        self.frame += 1
        self.frames_since_switch += 1
        self.history.append(observed_queue)
        self.stable_count = self.stable_count + 1 if observed_queue <= cfg.k_low else 0
        if self.in_probation:
            self.probation_frames += 1
        action = "hold"

        if self.in_probation and self.probation_frames <= cfg.probation_window \
                and observed_queue > cfg.k_high:
            # Rollback: the improvement attempt overfilled the queue.
            self.failed_at[self.level] = self.frame
            self.level = self.pre_attempt_level
            self.in_probation = False
            self.frames_since_switch = 0
            self.stable_count = 0
            action = "rollback"
        elif self.in_probation and self.probation_frames > cfg.probation_window:
            self.in_probation = False  # attempt succeeded

        if action == "hold" and self.frames_since_switch >= cfg.cooldown:
            growing = (
                len(self.history) == self.history.maxlen
                and _slope(self.history) >= cfg.growth_slope
            )
            if (observed_queue > cfg.k_high or growing) and self.level < self.ladder_size - 1:
                self.level += 1
                self.frames_since_switch = 0
                self.stable_count = 0
                self.in_probation = False
                action = "up"
            elif (
                self.stable_count >= cfg.stable_window
                and self.level > 0
                and not self._failed_recently(self.level - 1)
                and not self.in_probation
            ):
                self.pre_attempt_level = self.level
                self.level -= 1
                self.in_probation = True
                self.probation_frames = 0
                self.frames_since_switch = 0
                self.stable_count = 0
                action = "attempt"

        self.last_action = action
        return self.level
