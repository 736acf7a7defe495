"""Seeded i.i.d. erasure channel placed on the coded path between the proxies."""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._net import UdpService, udp_socket

_CHUNK = 4096
_DROP_STREAM = 0
_DELAY_STREAM = 1


@dataclass(frozen=True)
class ChannelConfig:
    loss_rate: float = 0.0
    seed: int = 0
    delay_ms: float = 0.0
    jitter_ms: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError(f"loss_rate must be in [0, 1], got {self.loss_rate}")
        if self.delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("delays must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@lru_cache(maxsize=64)
def _uniform_chunk(seed: int, stream: int, chunk: int) -> np.ndarray:
    # Index-addressable uniforms: the draw for index i depends only on
    # (seed, stream, i), never on how many verdicts were asked before it.
    rng = np.random.default_rng([seed, stream, chunk])
    u = rng.random(_CHUNK)
    u.flags.writeable = False
    return u


def uniform_at(seed: int, index: int, stream: int = _DROP_STREAM) -> float:
    chunk, offset = divmod(index, _CHUNK)
    return float(_uniform_chunk(seed, stream, chunk)[offset])


def channel_admit(cfg: ChannelConfig, packet_index: int) -> bool:
    """True if the packet with this ingress index survives the channel."""
    if cfg.loss_rate <= 0.0:
        return True
    if cfg.loss_rate >= 1.0:
        return False
    return uniform_at(cfg.seed, packet_index) >= cfg.loss_rate


def drop_pattern(cfg: ChannelConfig, count: int, start: int = 0) -> np.ndarray:
    """Vectorised ``channel_admit`` over ``range(start, start + count)``; True = dropped."""
    idx = np.arange(start, start + count)
    if cfg.loss_rate <= 0.0:
        return np.zeros(count, dtype=bool)
    if cfg.loss_rate >= 1.0:
        return np.ones(count, dtype=bool)
    out = np.empty(count, dtype=bool)
    chunks = idx // _CHUNK
    for c in np.unique(chunks):
        sel = chunks == c
        out[sel] = _uniform_chunk(cfg.seed, _DROP_STREAM, int(c))[idx[sel] % _CHUNK] < cfg.loss_rate
    return out


def channel_delay(cfg: ChannelConfig, packet_index: int) -> float:
    """One-way delay in seconds for this packet."""
    d = cfg.delay_ms
    if cfg.jitter_ms:
        u = uniform_at(cfg.seed, packet_index, _DELAY_STREAM)
        d += (2.0 * u - 1.0) * cfg.jitter_ms
    return max(0.0, d) / 1000.0


class ChannelCounters:
    def __init__(self):
        self._lock = threading.Lock()
        self.seen = 0
        self.dropped = 0
        self.forwarded = 0

    def record(self, kept: bool) -> int:
        with self._lock:
            index = self.seen
            self.seen += 1
            if kept:
                self.forwarded += 1
            else:
                self.dropped += 1
            return index

    def snapshot(self) -> dict:
        with self._lock:
            return {"seen": self.seen, "dropped": self.dropped, "forwarded": self.forwarded}


class ChannelRelay(UdpService):
    """UDP forwarder from ``ingress`` to ``egress`` applying the erasure channel."""

    def __init__(self, cfg: ChannelConfig, ingress, egress):
        super().__init__(ingress)
        self.cfg = cfg
        self.egress = egress
        self.out = udp_socket()
        self.counters = ChannelCounters()
        self._pending = []
        self._order = itertools.count()
        self._delayed = cfg.delay_ms > 0 or cfg.jitter_ms > 0

    def handle(self, data, addr, now):
        index = self.counters.seen
        kept = channel_admit(self.cfg, index)
        self.counters.record(kept)
        if not kept:
            return
        if not self._delayed:
            self.out.sendto(data, self.egress)
            return
        due = now + channel_delay(self.cfg, index)
        heapq.heappush(self._pending, (due, next(self._order), data))

    def next_deadline(self):
        return self._pending[0][0] if self._pending else None

    def tick(self, now):
        while self._pending and self._pending[0][0] <= now:
            _, _, data = heapq.heappop(self._pending)
            self.out.sendto(data, self.egress)

    def drain(self):
        while self._pending:
            _, _, data = heapq.heappop(self._pending)
            self.out.sendto(data, self.egress)


def channel_relay(cfg: ChannelConfig, ingress, egress) -> ChannelRelay:
    """Start a forwarder thread and return its handle (call ``.stop()`` to end it)."""
    return ChannelRelay(cfg, ingress, egress).start()
