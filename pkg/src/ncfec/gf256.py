"""Arithmetic over GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x + 1.

Scalars are plain ints in 0..255. Region operations work on uint8 numpy
arrays and are what the block codec uses for payload rows.
"""

import numpy as np

POLY = 0x11B
GENERATOR = 0x03


class FieldError(ArithmeticError):
    pass


def _xtime(x: int) -> int:
    x <<= 1
    if x & 0x100:
        x ^= POLY
    return x


def _build_tables():
    exp = np.zeros(510, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int16)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        # multiply by the generator 0x03 = x + 1
        x = _xtime(x) ^ x
    exp[255:] = exp[:255]
    log[0] = -1

    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = np.arange(1, 256)
    mul[1:, 1:] = exp[log[nz][:, None] + log[nz][None, :]]

    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[nz]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL_TABLE, INV_TABLE = _build_tables()
for _t in (EXP, LOG, MUL_TABLE, INV_TABLE):
    _t.flags.writeable = False
del _t


def gf_add(a: int, b: int) -> int:
    return (a ^ b) & 0xFF


def gf_mul(a: int, b: int) -> int:
    return int(MUL_TABLE[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise FieldError("zero has no multiplicative inverse in GF(256)")
    return int(INV_TABLE[a])


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def as_octets(buf) -> np.ndarray:
    if isinstance(buf, np.ndarray):
        if buf.dtype != np.uint8:
            raise TypeError(f"expected uint8 array, got {buf.dtype}")
        return buf
    return np.frombuffer(bytes(buf), dtype=np.uint8)


def gf_scale(src, c: int) -> np.ndarray:
    """Return ``c * src`` element-wise as a new array."""
    return MUL_TABLE[c].take(as_octets(src))


def gf_axpy(dst, src, c: int) -> np.ndarray:
    """dst[i] <- dst[i] + c * src[i].

    A writeable uint8 ``dst`` array is updated in place and returned; any
    other octet sequence is copied first.
    """
    s = as_octets(src)
    if isinstance(dst, np.ndarray) and dst.dtype == np.uint8 and dst.flags.writeable:
        d = dst
    else:
        d = np.array(as_octets(dst), dtype=np.uint8, copy=True)
    if d.shape != s.shape:
        raise ValueError(f"length mismatch: dst {d.shape} vs src {s.shape}")
    if c == 0:
        return d
    if c == 1:
        np.bitwise_xor(d, s, out=d)
    else:
        np.bitwise_xor(d, MUL_TABLE[c].take(s), out=d)
    return d


def gf_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(256): (m x k) @ (k x L) -> (m x L)."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for i in range(a.shape[0]):
        row = out[i]
        for j in range(a.shape[1]):
            c = a[i, j]
            if c:
                np.bitwise_xor(row, MUL_TABLE[c].take(b[j]), out=row)
    return out
