"""Throughput, sequence-gap loss and RFC 3550 interarrival jitter for one flow."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

CSV_COLUMNS = (
    "scenario",
    "loss_rate",
    "code_rate",
    "throughput_mbps",
    "jitter_ms",
    "delivered_loss",
    "tx_per_source_packet",
)

JITTER_GAIN = 1.0 / 16.0


def jitter_update(jitter, send_ts, recv_ts, prev=None):
    """One step of the smoothed jitter estimator.

    ``prev`` is the (send_ts, recv_ts) pair of the previous arrival, or None
    for the first packet. Units are whatever the timestamps use.
    """
    if prev is None:
        return 0.0
    prev_send, prev_recv = prev
    d = (recv_ts - prev_recv) - (send_ts - prev_send)
    return jitter + (abs(d) - jitter) * JITTER_GAIN


@dataclass
class FlowMetrics:
    bytes_delivered: int = 0
    packets_delivered: int = 0
    duplicates: int = 0
    max_seq: int = -1
    jitter_us: float = 0.0
    jitter_sum_us: float = 0.0
    first_arrival: float | None = None
    last_arrival: float | None = None
    _prev: tuple | None = field(default=None, repr=False)
    _seen: set = field(default_factory=set, repr=False)

    def loss_update(self, seq: int) -> bool:
        """Record a sequence number; returns False for a duplicate."""
        if seq in self._seen:
            self.duplicates += 1
            return False
        self._seen.add(seq)
        self.packets_delivered += 1
        if seq > self.max_seq:
            self.max_seq = seq
        return True

    def update(self, seq: int, send_us: int, recv_us: int, nbytes: int, now: float | None = None):
        if not self.loss_update(seq):
            return
        self.bytes_delivered += nbytes
        self.jitter_us = jitter_update(self.jitter_us, send_us, recv_us, self._prev)
        self._prev = (send_us, recv_us)
        self.jitter_sum_us += self.jitter_us
        t = recv_us / 1e6 if now is None else now
        if self.first_arrival is None:
            self.first_arrival = t
        self.last_arrival = t

    @property
    def packets_lost(self) -> int:
        return (self.max_seq + 1) - self.packets_delivered

    @property
    def window(self) -> float:
        if self.first_arrival is None:
            return 0.0
        return self.last_arrival - self.first_arrival

    @property
    def jitter_ms(self) -> float:
        return self.jitter_us / 1000.0

    @property
    def jitter_mean_ms(self) -> float:
        # average of J over all arrivals; unlike the final value it is not
        # dominated by whatever happened to the last few packets
        if not self.packets_delivered:
            return 0.0
        return self.jitter_sum_us / self.packets_delivered / 1000.0

    def throughput_bps(self, window: float | None = None) -> float:
        w = self.window if window is None else window
        if w <= 0:
            return 0.0
        return 8.0 * self.bytes_delivered / w

    def loss_fraction(self, packets_sent: int | None = None) -> float:
        total = self.max_seq + 1 if packets_sent is None else packets_sent
        if total <= 0:
            return 0.0
        return 1.0 - self.packets_delivered / total

    def snapshot(self) -> dict:
        return {
            "packets_delivered": self.packets_delivered,
            "packets_lost": self.packets_lost,
            "duplicates": self.duplicates,
            "bytes_delivered": self.bytes_delivered,
            "max_seq": self.max_seq,
            "window_s": self.window,
            "throughput_mbps": self.throughput_bps() / 1e6,
            "jitter_ms": self.jitter_ms,
            "jitter_mean_ms": self.jitter_mean_ms,
        }


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, str):
        return value
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{float(value):.6g}"


def emit_csv(rows) -> str:
    """Render result rows (mappings keyed by CSV_COLUMNS) as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([row["scenario"]] + [_fmt(row.get(c)) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {"scenario": raw["scenario"]}
        for c in CSV_COLUMNS[1:]:
            row[c] = float(raw[c])
        rows.append(row)
    return rows
