"""Transmissions per source packet: HARQ/ARQ bracket versus network coding.

Closed forms are evaluated in exact rational arithmetic. A float argument
is read through its shortest decimal repr, so ``0.2`` means exactly 1/5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class ModelDomainError(ValueError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _loss(r, allow_one=True) -> Fraction:
    r = as_fraction(r)
    if r < 0 or r > 1 or (r == 1 and not allow_one):
        raise ModelDomainError(f"loss rate {r} outside the model's domain")
    return r


@dataclass(frozen=True)
class RetxParams:
    harq_max_tx: int = 5
    arq_max_rounds: int = 8
    harq_share: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.harq_max_tx < 1:
            raise ValueError("harq_max_tx must be >= 1")
        if self.arq_max_rounds < 0:
            raise ValueError("arq_max_rounds must be >= 0")
        if not 0 <= self.harq_share <= 1:
            raise ValueError("harq_share must be a fraction of the lost mass")

    @property
    def harq_cost_range(self) -> tuple[int, int]:
        return min(2, self.harq_max_tx), self.harq_max_tx

    @property
    def arq_cost_range(self) -> tuple[int, int]:
        lo = self.harq_max_tx + 1
        return lo, max(lo, self.harq_max_tx * self.arq_max_rounds)


DEFAULT_RETX = RetxParams()


def _bracket(r: Fraction, harq_cost: int, arq_cost: int, params: RetxParams) -> Fraction:
    share = as_fraction(params.harq_share)
    return (1 - r) + r * share * harq_cost + r * (1 - share) * arq_cost


def p_ha_min(r, params: RetxParams = DEFAULT_RETX) -> Fraction:
    """Cheapest HARQ/ARQ outcome: 1 + 3r with the default parameters."""
    r = _loss(r)
    return _bracket(r, params.harq_cost_range[0], params.arq_cost_range[0], params)


def p_ha_max(r, params: RetxParams = DEFAULT_RETX) -> Fraction:
    """Most expensive HARQ/ARQ outcome: 1 + 21.5r with the default parameters."""
    r = _loss(r)
    return _bracket(r, params.harq_cost_range[1], params.arq_cost_range[1], params)


def p_nc(cr) -> Fraction:
    cr = as_fraction(cr)
    if not 0 < cr <= 1:
        raise ModelDomainError(f"code rate {cr} outside (0, 1]")
    return 1 / cr


def p_nc_capacity(r) -> Fraction:
    """Lower bound on coded packets per source packet over an erasure channel."""
    r = _loss(r, allow_one=False)
    return 1 / (1 - r)


def nc_advantage(r, params: RetxParams = DEFAULT_RETX) -> Fraction:
    return p_ha_max(r, params) / p_nc_capacity(r)


def dominance_margin(r) -> Fraction:
    """p_ha_min(r) - p_nc_capacity(r); non-negative exactly on [0, 2/3]."""
    return p_ha_min(r) - p_nc_capacity(r)


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    trials: int
    model: str

    def within(self, target, sigmas=3.0) -> bool:
        return abs(self.mean - float(target)) <= sigmas * self.stderr + 1e-12


def _sample(params: RetxParams, r: float, n: int, mode: str, rng) -> tuple[float, float]:
    lost = rng.random(n) < r
    via_harq = rng.random(n) < float(params.harq_share)
    hlo, hhi = params.harq_cost_range
    alo, ahi = params.arq_cost_range
    if mode == "min":
        harq, arq = hlo, alo
    elif mode == "max":
        harq, arq = hhi, ahi
    else:
        harq = rng.integers(hlo, hhi + 1, size=n)
        arq = rng.integers(alo, ahi + 1, size=n)
    cost = np.where(lost, np.where(via_harq, harq, arq), 1).astype(np.float64)
    return float(cost.sum()), float(np.square(cost).sum())


def mc_harq_arq_cost(params: RetxParams = DEFAULT_RETX, r=0.2, trials: int = 10**6, seed: int = 0,
                     mode: str = "uniform", chunk: int = 1 << 18) -> MCResult:
    """Monte Carlo mean transmissions per delivered packet.

    ``min``/``max`` pin every recovery to the cheapest/most expensive
    outcome and converge to p_ha_min/p_ha_max. ``uniform`` draws HARQ cost
    from {2..harq_max_tx} and ARQ cost from {harq_max_tx+1 .. harq_max_tx*arq_max_rounds}.
    Trials run in fixed-size ranges with spawned seeds, so the result does
    not depend on how ranges are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode not in ("min", "max", "uniform"):
        raise ValueError(f"unknown mode {mode!r}")
    r = float(_loss(r))
    nchunks = math.ceil(trials / chunk)
    seeds = np.random.SeedSequence(seed).spawn(nchunks)
    total = total_sq = 0.0
    for i, ss in enumerate(seeds):
        n = min(chunk, trials - i * chunk)
        s, sq = _sample(params, r, n, mode, np.random.default_rng(ss))
        total += s
        total_sq += sq
    mean = total / trials
    var = max(0.0, total_sq / trials - mean * mean)
    if trials > 1:
        var *= trials / (trials - 1)
    stderr = math.sqrt(var / trials)
    return MCResult(mean, stderr, trials, mode)
