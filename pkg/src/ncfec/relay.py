"""Encoder / decoder proxy pair and a plain passthrough forwarder.

The encoder listens where the application sends (``app_port``), forwards
every datagram at once as a systematic symbol and follows each full block
with its N-K coded symbols back to back. The decoder listens on
``coded_port``, rebuilds blocks and hands payloads to the consumer address.

``EncoderCore`` and ``DecoderCore`` hold all protocol logic and never touch
sockets; the proxies only move bytes.
"""

from __future__ import annotations

import collections
import csv
import logging
from dataclasses import dataclass, field

from ._net import UdpService, parse_addr, udp_socket
from .block_codec import BlockDecoder, BlockEncoder, CodecError, CodingParams, unframe_payload
from .wire import ParseError, parse, serialize

log = logging.getLogger(__name__)

ROLES = ("encoder", "decoder", "passthrough")
RELEASE_POLICIES = ("burst", "early")
# The decoder waits this many encoder idle intervals before giving up on
# pending blocks, so a timeout-triggered tail flush still lands in time.
DECODER_IDLE_FACTOR = 4


def default_coding() -> CodingParams:
    return CodingParams(k=10, n=15, symbol_size=1202)


@dataclass
class RelayConfig:
    role: str = "encoder"
    app_port: int = 5201
    coded_port: int = 5202
    peer: tuple | None = None
    host: str = "127.0.0.1"
    coding: CodingParams = field(default_factory=default_coding)
    release: str = "burst"
    idle_timeout_ms: float = 50.0
    seed: int = 0
    window: int = 8

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        if self.release not in RELEASE_POLICIES:
            raise ValueError(f"release must be one of {RELEASE_POLICIES}")
        if self.app_port == self.coded_port:
            raise ValueError("app_port and coded_port must differ")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.peer is not None:
            default = self.app_port if self.role == "decoder" else self.coded_port
            self.peer = parse_addr(self.peer, default_port=default)

    @property
    def listen(self) -> tuple:
        port = self.coded_port if self.role == "decoder" else self.app_port
        return (self.host, port)

    @property
    def destination(self) -> tuple:
        if self.peer is not None:
            return self.peer
        port = self.app_port if self.role == "decoder" else self.coded_port
        return ("127.0.0.1", port)


class EncoderCore:
    def __init__(self, params: CodingParams, idle_timeout: float = 0.05, seed: int = 0):
        self.params = params
        self.idle_timeout = idle_timeout
        self.encoder = BlockEncoder(params, seed=seed)
        self.last_push = None
        self.counters = collections.Counter()

    def on_datagram(self, data: bytes, now: float) -> list[bytes]:
        if len(data) > self.params.max_payload:
            if not self.counters["oversize"]:
                log.warning("dropping %d-octet datagram (limit %d)", len(data), self.params.max_payload)
            self.counters["oversize"] += 1
            return []
        self.counters["source_in"] += 1
        out = [serialize(self.encoder.push(data))]
        self.counters["systematic_out"] += 1
        self.last_push = now
        if self.encoder.full:
            out += self._flush()
        return out

    def _flush(self) -> list[bytes]:
        coded = self.encoder.flush()
        self.counters["coded_out"] += len(coded)
        self.counters["blocks"] += 1
        return [serialize(s) for s in coded]

    def deadline(self):
        if self.encoder.buffered and self.last_push is not None:
            return self.last_push + self.idle_timeout
        return None

    def on_idle(self, now: float) -> list[bytes]:
        d = self.deadline()
        if d is None or now < d:
            return []
        self.counters["partial_flushes"] += 1
        return self._flush()

    def drain(self) -> list[bytes]:
        if not self.encoder.buffered:
            return []
        self.counters["partial_flushes"] += 1
        return self._flush()

    @property
    def tx_per_source(self) -> float:
        src = self.counters["source_in"]
        if not src:
            return 0.0
        return (self.counters["systematic_out"] + self.counters["coded_out"]) / src


class DecoderCore:
    """Routes symbols to per-block decoders and decides when payloads leave.

    burst: a block's payloads are released together once it reaches full
    rank, and blocks leave in block_id order. early: systematic payloads are
    forwarded on arrival and decoding only fills the gaps.

    A pending block is abandoned (salvaged) when a symbol of block_id+2 or
    later shows up, when more than ``window`` blocks are pending, or after
    ``idle_timeout`` seconds without traffic.
    """

    def __init__(self, release: str = "burst", window: int = 8, idle_timeout: float = 0.2,
                 default_k: int = 10, on_release=None):
        if release not in RELEASE_POLICIES:
            raise ValueError(f"release must be one of {RELEASE_POLICIES}")
        self.release = release
        self.window = window
        self.idle_timeout = idle_timeout
        self.default_k = default_k
        self.on_release = on_release
        self.pending: dict[int, BlockDecoder] = {}
        self.early_sent: dict[int, set] = {}
        self.done: dict[int, list[bytes]] = {}
        self.next_emit = None
        self.max_seen = None
        self.last_rx = None
        self.counters = collections.Counter()
        self.parse_errors = collections.Counter()
        self.releases = collections.deque(maxlen=4096)

    # -- ingress -----------------------------------------------------------

    def on_datagram(self, data: bytes, now: float) -> list[bytes]:
        self.last_rx = now
        self.counters["datagrams"] += 1
        try:
            sym = parse(data)
        except ParseError as e:
            self.counters["malformed"] += 1
            self.parse_errors[e.code.value] += 1
            return []
        return self.on_symbol(sym)

    def on_symbol(self, sym) -> list[bytes]:
        out: list[bytes] = []
        b = sym.block_id
        if self.next_emit is None:
            self.next_emit = b
        if b < self.next_emit or b in self.done:
            self.counters["stale"] += 1
            return out
        if sym.systematic:
            self.default_k = sym.k
        if self.max_seen is None or b > self.max_seen:
            self.max_seen = b

        dec = self.pending.get(b)
        if dec is None:
            dec = self.pending[b] = BlockDecoder.for_symbol(sym)
            if self.release == "early":
                self.early_sent[b] = set()
        try:
            grew = dec.insert(sym)
        except CodecError as e:
            log.debug("rejecting symbol: %s", e)
            self.counters["rejected"] += 1
            grew = 0
        if not grew:
            self.counters["redundant"] += 1

        if self.release == "early" and grew and sym.systematic:
            sent = self.early_sent[b]
            if sym.slot not in sent:
                sent.add(sym.slot)
                payload = unframe_payload(sym.symbol)
                self.counters["delivered"] += 1
                out.append(payload)
                self._record(b, [payload])

        if dec.decodable:
            self._finish_decoded(b, out)

        for old in [x for x in self.pending if x <= b - 2]:
            self._salvage(old, out)
        while len(self.pending) > self.window:
            self._salvage(min(self.pending), out)
        self._emit(out)
        return out

    # -- block completion --------------------------------------------------

    def _finish_decoded(self, b: int, out: list):
        dec = self.pending.pop(b)
        payloads = dec.release()
        self.counters["blocks_decoded"] += 1
        if self.release == "early":
            sent = self.early_sent.pop(b)
            rest = [p for j, p in enumerate(payloads) if j not in sent]
            self.counters["delivered"] += len(rest)
            out.extend(rest)
            if rest:
                self._record(b, rest)
            self.done[b] = []
        else:
            self.counters["delivered"] += len(payloads)
            self.done[b] = payloads

    def _salvage(self, b: int, out: list):
        dec = self.pending.pop(b)
        got = dec.salvage()
        self.counters["blocks_salvaged"] += 1
        if self.release == "early":
            sent = self.early_sent.pop(b)
            rest = [got[j] for j in sorted(got) if j not in sent]
            self.counters["salvaged"] += len(rest)
            self.counters["lost"] += dec.k - len(sent) - len(rest)
            out.extend(rest)
            if rest:
                self._record(b, rest)
            self.done[b] = []
        else:
            payloads = [got[j] for j in sorted(got)]
            self.counters["salvaged"] += len(payloads)
            self.counters["lost"] += dec.k - len(payloads)
            self.done[b] = payloads

    def _emit(self, out: list, flush_all: bool = False):
        while self.next_emit is not None:
            b = self.next_emit
            if b in self.done:
                payloads = self.done.pop(b)
                if self.release == "burst" and payloads:
                    out.extend(payloads)
                    self._record(b, payloads)
            elif b in self.pending:
                break
            elif flush_all and self.max_seen is not None and b <= self.max_seen:
                self._whole_block_lost(b)
            elif self.max_seen is not None and (b <= self.max_seen - 2 or (self.done and min(self.done) > b)):
                self._whole_block_lost(b)
            else:
                break
            self.next_emit = b + 1

    def _whole_block_lost(self, b: int):
        self.counters["blocks_missing"] += 1
        self.counters["lost"] += self.default_k

    def _record(self, b: int, payloads: list):
        self.releases.append((b, len(payloads)))
        if self.on_release is not None:
            self.on_release(b, payloads)

    # -- timers ------------------------------------------------------------

    def deadline(self):
        if self.pending and self.last_rx is not None:
            return self.last_rx + self.idle_timeout
        return None

    def on_idle(self, now: float) -> list[bytes]:
        d = self.deadline()
        if d is None or now < d:
            return []
        return self.drain()

    def drain(self) -> list[bytes]:
        """Salvage everything pending and release it in order."""
        out: list[bytes] = []
        for b in sorted(self.pending):
            self._salvage(b, out)
        self._emit(out, flush_all=True)
        return out

    def accounted(self) -> int:
        c = self.counters
        return c["delivered"] + c["salvaged"] + c["lost"]


# -- socket front-ends -----------------------------------------------------

def write_counters_csv(path, counters: dict):
    keys = sorted(counters)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        w.writerow([counters[k] for k in keys])


class EncoderProxy(UdpService):
    def __init__(self, cfg: RelayConfig):
        super().__init__(cfg.listen)
        self.cfg = cfg
        self.dest = cfg.destination
        self.out = udp_socket()
        self.core = EncoderCore(cfg.coding, cfg.idle_timeout_ms / 1000.0, cfg.seed)

    def _send(self, datagrams):
        for d in datagrams:
            self.out.sendto(d, self.dest)

    def handle(self, data, addr, now):
        self._send(self.core.on_datagram(data, now))

    def next_deadline(self):
        return self.core.deadline()

    def tick(self, now):
        self._send(self.core.on_idle(now))

    def drain(self):
        self._send(self.core.drain())

    def counters(self) -> dict:
        c = dict(self.core.counters)
        c["tx_per_source"] = self.core.tx_per_source
        return c


class DecoderProxy(UdpService):
    def __init__(self, cfg: RelayConfig):
        super().__init__(cfg.listen)
        self.cfg = cfg
        self.dest = cfg.destination
        self.out = udp_socket()
        self.core = DecoderCore(
            release=cfg.release,
            window=cfg.window,
            idle_timeout=DECODER_IDLE_FACTOR * cfg.idle_timeout_ms / 1000.0,
            default_k=cfg.coding.k,
        )

    def _send(self, payloads):
        for p in payloads:
            self.out.sendto(p, self.dest)

    def handle(self, data, addr, now):
        self._send(self.core.on_datagram(data, now))

    def next_deadline(self):
        return self.core.deadline()

    def tick(self, now):
        self._send(self.core.on_idle(now))

    def drain(self):
        self._send(self.core.drain())

    def counters(self) -> dict:
        c = dict(self.core.counters)
        for code, n in self.core.parse_errors.items():
            c[f"malformed_{code}"] = n
        return c


class PassthroughProxy(UdpService):
    """Forwards datagrams from ``app_port`` to the peer unchanged."""

    def __init__(self, cfg: RelayConfig):
        super().__init__(cfg.listen)
        self.cfg = cfg
        self.dest = cfg.destination
        self.out = udp_socket()
        self.forwarded = 0

    def handle(self, data, addr, now):
        self.out.sendto(data, self.dest)
        self.forwarded += 1

    def counters(self) -> dict:
        return {"forwarded": self.forwarded}


_PROXIES = {"encoder": EncoderProxy, "decoder": DecoderProxy, "passthrough": PassthroughProxy}


def make_proxy(cfg: RelayConfig) -> UdpService:
    return _PROXIES[cfg.role](cfg)


def encoder_proxy_run(cfg: RelayConfig) -> EncoderProxy:
    if cfg.role != "encoder":
        raise ValueError("encoder_proxy_run needs role=encoder")
    return EncoderProxy(cfg).start()


def decoder_proxy_run(cfg: RelayConfig) -> DecoderProxy:
    if cfg.role != "decoder":
        raise ValueError("decoder_proxy_run needs role=decoder")
    return DecoderProxy(cfg).start()


def passthrough_run(cfg: RelayConfig) -> PassthroughProxy:
    if cfg.role != "passthrough":
        raise ValueError("passthrough_run needs role=passthrough")
    return PassthroughProxy(cfg).start()
