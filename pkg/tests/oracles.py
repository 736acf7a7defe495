"""Reference computations that share no code with the package under test."""

from fractions import Fraction
from math import comb


def clmul_mod(a, b, poly=0x11B):
    """Carry-less (peasant) multiplication followed by polynomial reduction."""
    prod = 0
    for i in range(8):
        if (b >> i) & 1:
            prod ^= a << i
    for bit in range(14, 7, -1):
        if (prod >> bit) & 1:
            prod ^= poly << (bit - 8)
    return prod


_MUL = [[clmul_mod(a, b) for b in range(256)] for a in range(256)]
_INV = [0] + [next(b for b in range(1, 256) if _MUL[a][b] == 1) for a in range(1, 256)]


def ref_mul(a, b):
    return _MUL[a][b]


def ref_inv(a):
    return _INV[a]


def ref_rank(rows):
    """Rank over GF(256) by textbook elimination on lists of ints."""
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = _INV[m[rank][col]]
        m[rank] = [_MUL[inv][x] for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col]:
                f = m[i][col]
                m[i] = [x ^ _MUL[f][y] for x, y in zip(m[i], m[rank])]
        rank += 1
    return rank


def ref_in_row_space(rows, vec):
    return ref_rank(list(rows) + [vec]) == ref_rank(rows)


def ref_combine(coeffs, symbols):
    """sum_j coeffs[j] * symbols[j], byte by byte."""
    out = [0] * len(symbols[0])
    for c, s in zip(coeffs, symbols):
        for i, x in enumerate(s):
            out[i] ^= _MUL[c][x]
    return bytes(out)


def rank_distribution(c, m, q=256):
    """P(rank = d) for a uniformly random c x m matrix over GF(q), d = 0..min(c, m)."""
    total = Fraction(q) ** (c * m)
    out = []
    for d in range(min(c, m) + 1):
        count = Fraction(1)
        for i in range(d):
            count *= Fraction((q**c - q**i) * (q**m - q**i), q**d - q**i)
        out.append(count / total)
    return out


def expected_recovered(m, c, q=256):
    """Expected number of the m missing systematic slots whose unit vector lies in
    the row space of c uniformly random coded rows (restricted to those slots)."""
    if m == 0:
        return Fraction(0)
    dist = rank_distribution(c, m, q)
    p_unit = sum(p * Fraction(q**d - 1, q**m - 1) for d, p in enumerate(dist))
    return m * p_unit


def residual_loss(k, n, r):
    """Per-packet delivered-loss probability of a systematic (k, n) block with salvage,
    i.i.d. erasures at rate r, by enumerating every (missing systematic, coded received) pair."""
    r = Fraction(r).limit_denominator(10**6)
    s = 1 - r
    lost = Fraction(0)
    for m in range(k + 1):
        pm = comb(k, m) * r**m * s**(k - m)
        for c in range(n - k + 1):
            pc = comb(n - k, c) * s**c * r**(n - k - c)
            lost += pm * pc * (m - expected_recovered(m, c))
    return lost / k


def block_failure(k, n, r):
    """P(fewer than k of n symbols survive) = P(Bin(n, 1-r) <= k-1)."""
    r = Fraction(r).limit_denominator(10**6)
    s = 1 - r
    return sum(comb(n, j) * s**j * r**(n - j) for j in range(k))
