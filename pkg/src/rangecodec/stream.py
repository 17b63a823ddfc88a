"""Framed transport with a sender-side queue, bandwidth-shaped links and
the ABR control loop closed around the queue.

The simulated link is the reproducibility target: a fixed tick (default
10 ms) advances a token budget of rate(t) * dt bytes; unused budget while
the queue is idle is lost.  Frames cross any link as u32 little-endian
length prefix + frame bytes.
"""

from __future__ import annotations

import socket
import struct
import time
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import pipeline
from .abr import QoEParams, QueueController, SessionLog, SessionRecord, evaluate_qoe
from .bitstream import MAGIC
from .errors import CorruptStream, LinkClosed

__all__ = [
    "BandwidthTrace",
    "SenderQueue",
    "SimulatedLink",
    "SocketLink",
    "EncodedFrameSource",
    "sender_loop",
    "receive_frames",
    "simulate",
    "SimulationResult",
]


@dataclass(frozen=True)
class BandwidthTrace:
    """Piecewise-constant rate schedule: (start_time s, rate bytes/s)."""

    steps: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("trace must have at least one step")
        times = [t for t, _ in self.steps]
        if times[0] != 0:
            raise ValueError("trace must start at t=0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace times must be strictly increasing")
        if any(r <= 0 for _, r in self.steps):
            raise ValueError("rates must be positive")

    @classmethod
    def from_steps(cls, steps: Iterable[Tuple[float, float]]) -> "BandwidthTrace":
        return cls(tuple((float(t), float(r)) for t, r in steps))

    @classmethod
    def from_csv(cls, path) -> "BandwidthTrace":
        steps = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("time"):
                    continue
                t, r = line.split(",")[:2]
                steps.append((float(t), float(r)))
        return cls.from_steps(steps)

    def rate_at(self, t: float) -> float:
        times = [s for s, _ in self.steps]
        return self.steps[max(0, bisect_right(times, t) - 1)][1]


@dataclass
class _QueuedFrame:
    index: int
    data: bytes
    remaining: int
    enqueue_time: float


class SenderQueue:
    """FIFO of encoded frames awaiting transmission."""

    def __init__(self, cap: Optional[int] = None):
        self._frames: List[_QueuedFrame] = []
        self.cap = cap
        self.bytes_enqueued = 0
        self.bytes_dropped = 0
        self.bytes_sent = 0

    def __len__(self):
        return len(self._frames)

    @property
    def byte_total(self) -> int:
        return sum(f.remaining for f in self._frames)

    def push(self, index: int, data: bytes, now: float) -> None:
        wire = struct.pack("<I", len(data)) + data
        self._frames.append(_QueuedFrame(index, wire, len(wire), now))
        self.bytes_enqueued += len(wire)
        if self.cap is not None:
            while len(self._frames) > self.cap:
                dropped = self._frames.pop(0)
                self.bytes_dropped += dropped.remaining

    def drain(self, budget: int, now: float):
        """Send up to ``budget`` bytes; returns fully delivered frames."""
        delivered = []
        while self._frames and budget > 0:
            head = self._frames[0]
            take = min(budget, head.remaining)
            head.remaining -= take
            budget -= take
            self.bytes_sent += take
            if head.remaining == 0:
                self._frames.pop(0)
                delivered.append((head.index, head.data, head.enqueue_time, now))
        return delivered


class SimulatedLink:
    """Bandwidth-shaped link driven by a trace; at most rate(t)*dt per tick."""

    def __init__(self, trace: BandwidthTrace, tick: float = 0.01):
        if tick <= 0:
            raise ValueError("tick must be positive")
        self.trace = trace
        self.tick = tick
        self._carry = 0.0

    def transmit(self, queue: SenderQueue, now: float):
        budget_f = self.trace.rate_at(now) * self.tick + self._carry
        budget = int(budget_f)
        delivered = queue.drain(budget, now + self.tick)
        if len(queue):
            self._carry = budget_f - budget
        else:
            self._carry = 0.0  # idle budget is lost
        return delivered


class SocketLink:
    """Best-effort TCP transport; the OS does the pacing."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "SocketLink":
        return cls(socket.create_connection((host, port), timeout=timeout))

    def transmit(self, queue: SenderQueue, now: float):
        delivered = []
        try:
            while len(queue):
                frame = queue._frames[0]
                self.sock.sendall(frame.data[-frame.remaining:] if frame.remaining != len(frame.data) else frame.data)
                queue.bytes_sent += frame.remaining
                frame.remaining = 0
                queue._frames.pop(0)
                delivered.append((frame.index, frame.data, frame.enqueue_time, now))
        except OSError as exc:
            raise LinkClosed(str(exc)) from exc
        return delivered

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class EncodedFrameSource:
    """Frame source backed by point clouds, compressed on demand and cached.

    Clouds are cycled when the session outlives the dataset; the cache
    keys on (cloud index, ladder level) so long sessions stay cheap.
    """

    def __init__(self, clouds: Sequence[np.ndarray], ladder=None, backend: str = "zlib"):
        if not len(clouds):
            raise ValueError("need at least one cloud")
        self.clouds = list(clouds)
        self.ladder = ladder or pipeline.default_ladder()
        self.backend = backend
        self._cache = {}

    def frame_bytes(self, frame_index: int, level_id: int) -> bytes:
        key = (frame_index % len(self.clouds), level_id)
        blob = self._cache.get(key)
        if blob is None:
            frame, _ = pipeline.compress(self.clouds[key[0]], self.ladder[level_id], backend=self.backend)
            blob = frame.to_bytes()
            self._cache[key] = blob
        return blob


def sender_loop(
    source: EncodedFrameSource,
    link,
    controller: Optional[QueueController] = None,
    *,
    fps: float = 10.0,
    duration: float = 10.0,
    fixed_level: int = 0,
    tick: float = 0.01,
    queue_cap: Optional[int] = None,
    on_delivery: Optional[Callable] = None,
) -> SessionLog:
    """Run the encode-enqueue-drain loop for ``duration`` seconds.

    Each frame interval: compress at the controller's level (or the fixed
    level), enqueue, and record (frame, level, queue length) with the
    queue measured after draining and before the new frame joins.  After
    the last frame the queue is flushed for at most another ``duration``.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    queue = SenderQueue(cap=queue_cap)
    log = SessionLog()
    n_frames = int(round(duration * fps))
    frame_interval = 1.0 / fps
    level = controller.level if controller is not None else fixed_level

    n_ticks = int(round((duration * 2) / tick))
    next_frame = 0
    t = 0.0
    for step in range(n_ticks):
        t = step * tick
        try:
            for item in link.transmit(queue, t):
                if on_delivery:
                    on_delivery(*item)
        except LinkClosed:
            return log
        if next_frame < n_frames and t + 1e-9 >= next_frame * frame_interval:
            blob = source.frame_bytes(next_frame, level)
            observed = len(queue)
            queue.push(next_frame, blob, t)
            rec = SessionRecord(
                frame=next_frame, level=level, queue=observed,
                nbytes=len(blob), timestamp=t,
            )
            if controller is not None:
                level = controller.step(observed)
                rec.action = controller.last_action
            log.append(rec)
            next_frame += 1
        if next_frame >= n_frames and not len(queue):
            break
    return log


def receive_frames(stream, max_frame: int = 1 << 30):
    """Parse length-prefixed frames from a byte stream, decoding each.

    Yields (sequence_number, points, decode_ms).  A corrupted frame is
    skipped by resynchronizing on the next magic occurrence; only the
    damaged frame is lost.
    """
    def resync(buf: bytes) -> bytes:
        # A frame starts 4 bytes before its magic; skip candidates whose
        # length prefix has already been consumed.
        pos = buf.find(MAGIC, 5)
        while pos != -1:
            if pos >= 4:
                return buf[pos - 4 :]
            pos = buf.find(MAGIC, pos + 1)
        return buf[-7:]

    buf = b""
    seq = 0
    eof = False
    while True:
        progressed = True
        while progressed and len(buf) >= 8:
            progressed = False
            if buf[4:8] != MAGIC:
                buf = resync(buf)
                progressed = True
                continue
            (length,) = struct.unpack_from("<I", buf)
            if not 0 < length <= max_frame:
                buf = resync(buf)
                progressed = True
                continue
            if len(buf) < 4 + length:
                break  # wait for more bytes
            blob = buf[4 : 4 + length]
            buf = buf[4 + length :]
            try:
                t0 = time.perf_counter()
                points = pipeline.decompress(blob)
                yield seq, points, (time.perf_counter() - t0) * 1e3
            except CorruptStream:
                pass
            seq += 1
            progressed = True
        if eof:
            return
        chunk = stream.read(65536)
        if not chunk:
            eof = True
        else:
            buf += chunk


@dataclass
class SimulationResult:
    with_strategy: SessionLog
    without_strategy: SessionLog
    qoe_with: float
    qoe_without: float

    def summary(self) -> dict:
        return {
            "qoe_with_strategy": self.qoe_with,
            "qoe_without_strategy": self.qoe_without,
            "mean_queue_with": float(np.mean(self.with_strategy.queues())),
            "mean_queue_without": float(np.mean(self.without_strategy.queues())),
            "max_queue_with": max(self.with_strategy.queues()),
            "max_queue_without": max(self.without_strategy.queues()),
        }


def simulate(
    trace: BandwidthTrace,
    source: EncodedFrameSource,
    *,
    fps: float = 10.0,
    duration: Optional[float] = None,
    tick: float = 0.01,
    controller_config=None,
    qoe_params: Optional[QoEParams] = None,
    fixed_level: int = 0,
) -> SimulationResult:
    """Run the same inputs with and without the ABR strategy.

    Deterministic given (trace, source, tick): both runs share the frame
    source cache and a fixed tick grid.
    """
    if duration is None:
        duration = trace.steps[-1][0] + 60.0
    controller = QueueController(len(source.ladder), controller_config)
    with_log = sender_loop(
        source, SimulatedLink(trace, tick), controller,
        fps=fps, duration=duration, tick=tick,
    )
    without_log = sender_loop(
        source, SimulatedLink(trace, tick), None,
        fps=fps, duration=duration, tick=tick, fixed_level=fixed_level,
    )
    return SimulationResult(
        with_strategy=with_log,
        without_strategy=without_log,
        qoe_with=evaluate_qoe(with_log, qoe_params),
        qoe_without=evaluate_qoe(without_log, qoe_params),
    )
