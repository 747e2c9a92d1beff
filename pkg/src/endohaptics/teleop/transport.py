"""Simulated one-way link with latency, uniform jitter and random drops.

Delivery is at-most-once. The receiving end holds early arrivals in a
reorder buffer so messages are handed over in seq order. A missing seq is
declared lost once a later message's worst-case arrival deadline has
passed; losses are counted, never replayed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .protocol import TeleopMessage


@dataclass(frozen=True)
class TransportModel:
    base_latency: float = 0.0
    jitter: float = 0.0
    drop_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.base_latency, self.jitter, self.drop_rate)):
            raise ValueError("transport parameters must be finite")
        if self.base_latency < 0:
            raise ValueError(f"base_latency must be >= 0, got {self.base_latency}")
        if not 0 <= self.jitter <= self.base_latency:
            raise ValueError(f"jitter must be in [0, base_latency], got {self.jitter}")
        if not 0 <= self.drop_rate < 1:
            raise ValueError(f"drop_rate must be in [0, 1), got {self.drop_rate}")

    @property
    def max_latency(self) -> float:
        return self.base_latency + self.jitter

    @property
    def min_latency(self) -> float:
        return self.base_latency - self.jitter


@dataclass(frozen=True)
class Delivery:
    message: TeleopMessage
    sent_at: float
    arrival: float


class Channel:
    """One direction of the link, carrying a single sender's stream."""

    def __init__(self, model: TransportModel, rng: np.random.Generator):
        self.model = model
        self._rng = rng
        self._in_flight: list[tuple[float, int, Delivery]] = []
        self._arrived: dict[int, Delivery] = {}
        self._next_seq = 0  # senders number their stream from 0
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.gaps = 0

    def send(self, msg: TeleopMessage, now: float) -> None:
        self.sent += 1
        m = self.model
        if m.drop_rate > 0 and self._rng.random() < m.drop_rate:
            self.dropped += 1
            return
        latency = m.base_latency
        if m.jitter > 0:
            latency += self._rng.uniform(-m.jitter, m.jitter)
        d = Delivery(msg, now, now + latency)
        heapq.heappush(self._in_flight, (d.arrival, msg.seq, d))

    def receive(self, now: float) -> list[Delivery]:
        """Everything releasable at time ``now``, in seq order."""
        while self._in_flight and self._in_flight[0][0] <= now:
            _, seq, d = heapq.heappop(self._in_flight)
            self._arrived[seq] = d
        out: list[Delivery] = []
        while self._arrived:
            d = self._arrived.pop(self._next_seq, None)
            if d is not None:
                out.append(d)
                self._next_seq += 1
                continue
            later = min(self._arrived)
            deadline = self._arrived[later].message.t_sim + self.model.max_latency
            if now < deadline:
                break
            self.gaps += later - self._next_seq
            self._next_seq = later
        self.delivered += len(out)
        return out

    @property
    def pending(self) -> int:
        return len(self._in_flight) + len(self._arrived)
