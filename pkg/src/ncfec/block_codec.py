"""Systematic block RLNC: encoder and incremental Gauss-Jordan decoder.

A block (generation) holds K source payloads. Each payload travels once as a
systematic symbol (unit coefficient vector) and the block is then protected
by N-K coded symbols whose coefficients are drawn uniformly from GF(256).
Inside a symbol the payload is framed as ``len(2, big-endian) | data | zeros``
so variable-size datagrams fit fixed-size coding slots.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gf256 import INV_TABLE, MUL_TABLE, gf_matmul

LENGTH_PREFIX = 2
MAX_K = 255


class CodecError(Exception):
    pass


class PayloadTooLarge(CodecError):
    pass


class NotReady(CodecError):
    pass


@dataclass(frozen=True)
class CodingParams:
    k: int
    n: int
    symbol_size: int

    def __post_init__(self):
        if not 1 <= self.k <= MAX_K:
            raise ValueError(f"k must be in 1..{MAX_K}, got {self.k}")
        if not self.k <= self.n <= 255:
            raise ValueError(f"n must be in k..255, got n={self.n} k={self.k}")
        if not 3 <= self.symbol_size <= 0xFFFF:
            raise ValueError(f"symbol_size must be in 3..65535, got {self.symbol_size}")

    @property
    def code_rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    @property
    def max_payload(self) -> int:
        return self.symbol_size - LENGTH_PREFIX


@dataclass(frozen=True)
class CodedSymbol:
    """One coding unit. ``slot`` is the source index for systematic symbols, None for coded ones."""

    block_id: int
    k: int
    n: int
    slot: int | None
    coefficients: bytes
    symbol: bytes

    @property
    def systematic(self) -> bool:
        return self.slot is not None

    @property
    def symbol_size(self) -> int:
        return len(self.symbol)


def frame_payload(data: bytes, symbol_size: int) -> bytes:
    if len(data) > symbol_size - LENGTH_PREFIX:
        raise PayloadTooLarge(f"{len(data)} octets does not fit symbol_size {symbol_size}")
    pad = symbol_size - LENGTH_PREFIX - len(data)
    return struct.pack(">H", len(data)) + bytes(data) + bytes(pad)


def unframe_payload(symbol) -> bytes:
    raw = bytes(symbol)
    (length,) = struct.unpack_from(">H", raw)
    if length > len(raw) - LENGTH_PREFIX:
        raise CodecError(f"length prefix {length} exceeds symbol of {len(raw)} octets")
    return raw[LENGTH_PREFIX:LENGTH_PREFIX + length]


def unit_vector(k: int, index: int) -> bytes:
    v = bytearray(k)
    v[index] = 1
    return bytes(v)


class BlockEncoder:
    """Buffers up to K framed payloads for the current block."""

    def __init__(self, params: CodingParams, block_id: int = 0, seed: int = 0):
        self.params = params
        self.block_id = block_id
        self.seed = seed
        self.buffered: list[bytes] = []

    @property
    def full(self) -> bool:
        return len(self.buffered) >= self.params.k

    def push(self, payload: bytes) -> CodedSymbol:
        if self.full:
            raise CodecError("block is full; flush before pushing")
        sym = frame_payload(payload, self.params.symbol_size)
        slot = len(self.buffered)
        self.buffered.append(sym)
        p = self.params
        return CodedSymbol(self.block_id, p.k, p.n, slot, unit_vector(p.k, slot), sym)

    def coefficients(self, rng_seed: int | None = None) -> np.ndarray:
        """Coefficient matrix (N-K x K') for the current block, K' = buffered count."""
        seed = self.seed if rng_seed is None else rng_seed
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, self.block_id])
        return rng.integers(0, 256, size=(self.params.redundancy, len(self.buffered)), dtype=np.uint8)

    def flush(self, rng_seed: int | None = None) -> list[CodedSymbol]:
        """Emit the N-K redundancy symbols and start the next block.

        A partial block (timeout flush) is coded over the K' symbols actually
        buffered; its coded symbols carry k=K' and n=K'+(N-K).
        """
        if not self.buffered:
            return []
        k_eff = len(self.buffered)
        coeffs = self.coefficients(rng_seed)
        sources = np.frombuffer(b"".join(self.buffered), dtype=np.uint8).reshape(k_eff, -1)
        coded = gf_matmul(coeffs, sources)
        n_eff = k_eff + self.params.redundancy
        out = [
            CodedSymbol(self.block_id, k_eff, n_eff, None, coeffs[i].tobytes(), coded[i].tobytes())
            for i in range(coeffs.shape[0])
        ]
        self.block_id = (self.block_id + 1) & 0xFFFFFFFF
        self.buffered = []
        return out


def encode_block(params: CodingParams, payloads, block_id: int = 0, seed: int = 0) -> list[CodedSymbol]:
    """Convenience: all N symbols of one block (systematic first)."""
    enc = BlockEncoder(params, block_id=block_id, seed=seed)
    out = [enc.push(p) for p in payloads]
    return out + enc.flush()


class BlockDecoder:
    """Per-block decoder holding a reduced row-echelon system.

    Rows are stored by pivot column: ``coeffs[c]``/``payload[c]`` are valid
    iff ``pivot[c]``. Every stored row has a 1 at its pivot and 0 at every
    other pivot column, so at full rank the payload rows are the sources.
    """

    def __init__(self, block_id: int, k: int, symbol_size: int):
        self.block_id = block_id
        self.k = k
        self.symbol_size = symbol_size
        self.coeffs = np.zeros((k, k), dtype=np.uint8)
        self.payload = np.zeros((k, symbol_size), dtype=np.uint8)
        self.pivot = np.zeros(k, dtype=bool)
        self.rank = 0
        self.released = False
        self.received = 0

    @classmethod
    def for_symbol(cls, sym: CodedSymbol) -> "BlockDecoder":
        return cls(sym.block_id, sym.k, sym.symbol_size)

    @property
    def decodable(self) -> bool:
        return self.rank == self.k

    def _shrink(self, k: int):
        # A timeout-flushed block announces its effective size through its
        # coded symbols; systematic rows only ever occupy slots < k.
        if self.coeffs[:, k:].any():
            raise CodecError(f"block {self.block_id}: rows reference slots >= {k}")
        self.k = k
        self.coeffs = np.ascontiguousarray(self.coeffs[:k, :k])
        self.payload = self.payload[:k]
        self.pivot = self.pivot[:k]

    def _row(self, sym: CodedSymbol) -> np.ndarray:
        c = np.frombuffer(sym.coefficients, dtype=np.uint8)
        if len(c) == self.k:
            return c.copy()
        if len(c) > self.k:
            if c[self.k:].any():
                raise CodecError(f"block {self.block_id}: symbol references slot beyond k={self.k}")
            return c[:self.k].copy()
        self._shrink(len(c))
        return c.copy()

    def insert(self, sym: CodedSymbol) -> int:
        """Row-reduce ``sym`` into the system. Returns 1 if rank grew, else 0."""
        if self.released:
            return 0
        if sym.block_id != self.block_id:
            raise CodecError(f"symbol for block {sym.block_id} fed to decoder of block {self.block_id}")
        if sym.symbol_size != self.symbol_size:
            raise CodecError(f"symbol_size {sym.symbol_size} != {self.symbol_size}")
        self.received += 1
        c = self._row(sym)
        p = np.frombuffer(sym.symbol, dtype=np.uint8).copy()

        # pivot rows are zero at every other pivot column, so one pass suffices
        for col in np.flatnonzero((c != 0) & self.pivot):
            f = c[col]
            table = MUL_TABLE[f]
            np.bitwise_xor(c, table.take(self.coeffs[col]), out=c)
            np.bitwise_xor(p, table.take(self.payload[col]), out=p)

        nz = np.flatnonzero(c)
        if len(nz) == 0:
            return 0
        lead = nz[0]
        f = c[lead]
        if f != 1:
            table = MUL_TABLE[INV_TABLE[f]]
            c = table.take(c)
            p = table.take(p)

        # clear the new pivot column from existing rows
        for col in np.flatnonzero(self.pivot & (self.coeffs[:, lead] != 0)):
            g = self.coeffs[col, lead]
            table = MUL_TABLE[g]
            np.bitwise_xor(self.coeffs[col], table.take(c), out=self.coeffs[col])
            np.bitwise_xor(self.payload[col], table.take(p), out=self.payload[col])

        self.coeffs[lead] = c
        self.payload[lead] = p
        self.pivot[lead] = True
        self.rank += 1
        return 1

    def release(self) -> list[bytes]:
        if self.rank < self.k:
            raise NotReady(f"block {self.block_id}: rank {self.rank} < k {self.k}")
        self.released = True
        return [unframe_payload(self.payload[j]) for j in range(self.k)]

    def recoverable_slots(self) -> list[int]:
        """Slots whose unit vector lies in the row space (a pivot row that is itself a unit row)."""
        nnz = np.count_nonzero(self.coeffs, axis=1)
        return [j for j in range(self.k) if self.pivot[j] and nnz[j] == 1]

    def salvage(self) -> dict[int, bytes]:
        """Payloads recoverable without full rank, keyed by slot."""
        out = {}
        for j in self.recoverable_slots():
            try:
                out[j] = unframe_payload(self.payload[j])
            except CodecError:
                continue
        self.released = True
        return out


# Functional aliases matching the operation names used throughout the docs.

def encoder_push(state: BlockEncoder, payload: bytes) -> CodedSymbol:
    return state.push(payload)


def encoder_flush(state: BlockEncoder, rng_seed: int) -> list[CodedSymbol]:
    return state.flush(rng_seed)


def decoder_insert(state: BlockDecoder, sym: CodedSymbol) -> int:
    return state.insert(sym)


def decoder_release(state: BlockDecoder) -> list[bytes]:
    return state.release()


def decoder_salvage(state: BlockDecoder) -> dict[int, bytes]:
    return state.salvage()
