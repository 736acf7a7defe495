"""iperf-style paced UDP sender and measuring sink.

Every datagram starts with an 8-octet sequence number and an 8-octet send
timestamp (microseconds, CLOCK_MONOTONIC), both big-endian; the remainder is
a filler pattern derived from the sequence number so the sink can spot
corruption.
"""

from __future__ import annotations

import hashlib
import logging
import math
import struct
import time
from dataclasses import dataclass

from ._net import UdpService, udp_socket
from .metrics import FlowMetrics

log = logging.getLogger(__name__)

HEADER = struct.Struct(">QQ")
MIN_PAYLOAD = HEADER.size
_PATTERN = bytes(range(256)) * 260


@dataclass(frozen=True)
class TrafficConfig:
    target_rate: float = 10e6
    payload_size: int = 1200
    duration: float = 10.0

    def __post_init__(self):
        if self.payload_size < MIN_PAYLOAD:
            raise ValueError(f"payload_size must be >= {MIN_PAYLOAD}")
        if self.payload_size > len(_PATTERN) - 256 + MIN_PAYLOAD:
            raise ValueError("payload_size too large")
        if self.target_rate <= 0:
            raise ValueError("target_rate must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def interval(self) -> float:
        return self.payload_size * 8.0 / self.target_rate

    @property
    def packet_count(self) -> int:
        return round(self.duration * self.target_rate / (8 * self.payload_size))


def now_us() -> int:
    return time.monotonic_ns() // 1000


def filler(seq: int, size: int) -> bytes:
    off = seq & 0xFF
    return _PATTERN[off:off + size - MIN_PAYLOAD]


def make_payload(seq: int, send_us: int, size: int) -> bytes:
    return HEADER.pack(seq, send_us) + filler(seq, size)


@dataclass
class SendReport:
    packets_sent: int
    bytes_sent: int
    elapsed: float
    digest: str

    @property
    def actual_rate(self) -> float:
        return 8.0 * self.bytes_sent / self.elapsed if self.elapsed > 0 else 0.0

    def as_dict(self) -> dict:
        return {
            "packets_sent": self.packets_sent,
            "bytes_sent": self.bytes_sent,
            "elapsed_s": self.elapsed,
            "actual_rate_bps": self.actual_rate,
            "digest": self.digest,
        }


def generate(cfg: TrafficConfig, dest, sock=None) -> SendReport:
    """Send ``cfg.packet_count`` datagrams to ``dest`` on an absolute pacing schedule.

    Falling behind the schedule (e.g. when descheduled) is caught up by
    sending immediately, which keeps the average rate on target.
    """
    own = sock is None
    if own:
        sock = udp_socket()
    count = cfg.packet_count
    interval = cfg.interval
    size = cfg.payload_size
    digest = hashlib.sha256()
    sendto = sock.sendto
    try:
        t0 = time.monotonic()
        for seq in range(count):
            wait = t0 + seq * interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            payload = make_payload(seq, now_us(), size)
            sendto(payload, dest)
            digest.update(payload)
        # the last datagram owns a full interval
        elapsed = time.monotonic() - t0 + (interval if count else 0.0)
    finally:
        if own:
            sock.close()
    return SendReport(count, count * size, elapsed if count else 0.0, digest.hexdigest())


class Sink(UdpService):
    """Measuring receiver; ``idle_timeout`` (seconds, after the first packet) ends the run."""

    def __init__(self, listen, idle_timeout: float | None = None, expected: TrafficConfig | None = None):
        super().__init__(listen)
        self.metrics = FlowMetrics()
        self.expected = expected
        self.idle_timeout = idle_timeout
        self.malformed = 0
        self.corrupt = 0
        self.in_order = True
        self._last_seq = -1
        self._digest = hashlib.sha256()

    def handle(self, data, addr, now):
        recv_us = now_us()
        if len(data) < MIN_PAYLOAD:
            self.malformed += 1
            return
        seq, send_us = HEADER.unpack_from(data)
        if data[MIN_PAYLOAD:] != filler(seq, len(data)):
            self.corrupt += 1
        before = self.metrics.packets_delivered
        self.metrics.update(seq, send_us, recv_us, len(data), now)
        if self.metrics.packets_delivered != before:
            self._digest.update(data)
            if seq < self._last_seq:
                self.in_order = False
            self._last_seq = seq

    def tick(self, now):
        last = self.metrics.last_arrival
        if self.idle_timeout is not None and last is not None and now - last >= self.idle_timeout:
            self.request_stop()

    @property
    def digest(self) -> str:
        return self._digest.hexdigest()

    def report(self, packets_sent: int | None = None) -> dict:
        if packets_sent is None and self.expected is not None:
            packets_sent = self.expected.packet_count
        out = self.metrics.snapshot()
        out.update(
            malformed=self.malformed,
            corrupt=self.corrupt,
            in_order=self.in_order,
            digest=self.digest,
            loss_fraction=self.metrics.loss_fraction(packets_sent),
        )
        return out


def sink(listen, expected: TrafficConfig | None = None, idle_timeout: float = 2.0) -> FlowMetrics:
    """Blocking receive until ``idle_timeout`` seconds pass with no traffic; returns the flow metrics."""
    s = Sink(listen, idle_timeout=idle_timeout, expected=expected)
    try:
        s.serve()
    finally:
        s.sock.close()
    return s.metrics


def expected_packets(rate_bps: float, duration: float, payload_size: int) -> int:
    return round(duration * rate_bps / (8 * payload_size))


def binomial_3sigma(n: int, p: float) -> float:
    return 3.0 * math.sqrt(p * (1 - p) / n)
