"""Datagram layout exchanged between the encoder and decoder proxies.

    offset  size  field
    0       2     magic 0x4E 0x43 ("NC")
    2       1     version = 0x01
    3       1     kind: 0 systematic, 1 coded
    4       4     block_id, big-endian
    8       1     k
    9       1     n
    10      1     slot index (systematic) or 0xFF (coded)
    11      2     symbol_size, big-endian
    13      k     coefficients (coded only)
    ..      S     symbol (symbol_size octets)

All multi-octet integers are in network byte order.
"""

import enum
import struct

from .block_codec import CodedSymbol, unit_vector

MAGIC = b"NC"
VERSION = 1
KIND_SYSTEMATIC = 0
KIND_CODED = 1
CODED_SLOT = 0xFF

_HEADER = struct.Struct(">2sBBIBBBH")
HEADER_SIZE = _HEADER.size


class ParseErrorCode(enum.Enum):
    TRUNCATED = "truncated"
    BAD_MAGIC = "bad_magic"
    BAD_VERSION = "bad_version"
    BAD_KIND = "bad_kind"
    BAD_PARAMS = "bad_params"
    SLOT_OUT_OF_RANGE = "slot_out_of_range"
    TRAILING_DATA = "trailing_data"


class ParseError(ValueError):
    def __init__(self, code: ParseErrorCode, detail: str = ""):
        super().__init__(f"{code.value}: {detail}" if detail else code.value)
        self.code = code


def datagram_size(kind: int, k: int, symbol_size: int) -> int:
    return HEADER_SIZE + (k if kind == KIND_CODED else 0) + symbol_size


def serialize(sym: CodedSymbol) -> bytes:
    if sym.systematic:
        head = _HEADER.pack(MAGIC, VERSION, KIND_SYSTEMATIC, sym.block_id, sym.k, sym.n,
                            sym.slot, len(sym.symbol))
        return head + sym.symbol
    head = _HEADER.pack(MAGIC, VERSION, KIND_CODED, sym.block_id, sym.k, sym.n,
                        CODED_SLOT, len(sym.symbol))
    return head + sym.coefficients + sym.symbol


def parse(datagram: bytes) -> CodedSymbol:
    """Decode one datagram; raises ParseError with a stable code on malformed input."""
    buf = bytes(datagram)
    if len(buf) < HEADER_SIZE:
        raise ParseError(ParseErrorCode.TRUNCATED, f"{len(buf)} < header {HEADER_SIZE}")
    magic, version, kind, block_id, k, n, slot, size = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ParseError(ParseErrorCode.BAD_MAGIC)
    if version != VERSION:
        raise ParseError(ParseErrorCode.BAD_VERSION, str(version))
    if kind not in (KIND_SYSTEMATIC, KIND_CODED):
        raise ParseError(ParseErrorCode.BAD_KIND, str(kind))
    if k == 0 or n < k or size < 3:
        raise ParseError(ParseErrorCode.BAD_PARAMS, f"k={k} n={n} symbol_size={size}")

    expected = datagram_size(kind, k, size)
    if len(buf) < expected:
        raise ParseError(ParseErrorCode.TRUNCATED, f"{len(buf)} < {expected}")
    if len(buf) > expected:
        raise ParseError(ParseErrorCode.TRAILING_DATA, f"{len(buf)} > {expected}")

    if kind == KIND_SYSTEMATIC:
        if slot >= k:
            raise ParseError(ParseErrorCode.SLOT_OUT_OF_RANGE, f"slot {slot} >= k {k}")
        return CodedSymbol(block_id, k, n, slot, unit_vector(k, slot), buf[HEADER_SIZE:])
    if slot != CODED_SLOT:
        raise ParseError(ParseErrorCode.SLOT_OUT_OF_RANGE, f"coded symbol with slot {slot}")
    coeffs = buf[HEADER_SIZE:HEADER_SIZE + k]
    return CodedSymbol(block_id, k, n, None, coeffs, buf[HEADER_SIZE + k:])
