"""Ideal and Robust Soliton degree distributions and alpha-interval degree selection."""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

_SUM_TOL = 1e-12


class DegenerateRobustParameters(ValueError):
    """Raised when (K, c, delta) do not give a well-formed Robust Soliton spike."""


@dataclass(frozen=True)
class DegreeDistribution:
    kind: str
    K: int
    pmf: tuple[float, ...]
    cdf: tuple[float, ...]

    def prob(self, degree: int) -> float:
        if 1 <= degree <= self.K:
            return self.pmf[degree - 1]
        return 0.0

    def with_zero_bin(self) -> list[float]:
        """pmf indexed by degree 0..K (degree 0 always carries zero mass)."""
        return [0.0, *self.pmf]


def _from_pmf(kind: str, pmf: list[float]) -> DegreeDistribution:
    cdf = []
    acc = 0.0
    for p in pmf:
        acc += p
        cdf.append(acc)
    if abs(cdf[-1] - 1.0) > _SUM_TOL:
        raise ArithmeticError(f"{kind} pmf sums to {cdf[-1]!r}")
    # pin the top of the cdf so alpha = 1 always lands on degree K
    cdf[-1] = 1.0
    return DegreeDistribution(kind, len(pmf), tuple(pmf), tuple(cdf))


def _rho(K: int) -> list[float]:
    return [1.0 / K] + [1.0 / (i * (i - 1)) for i in range(2, K + 1)]


@lru_cache(maxsize=4096)
def ideal_soliton(K: int) -> DegreeDistribution:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return _from_pmf("ideal", _rho(K))


def robust_pivot(K: int, c: float, delta: float) -> tuple[float, int]:
    """Return (R, pivot) with R = c ln(K/delta) sqrt(K) and pivot = ceil(K/R)."""
    if c <= 0 or not 0 < delta < 1:
        raise ValueError(f"need c > 0 and 0 < delta < 1, got c={c}, delta={delta}")
    R = c * math.log(K / delta) * math.sqrt(K)
    if R <= delta:
        raise DegenerateRobustParameters(
            f"degenerate robust parameters: R={R:.6g} <= delta={delta} (K={K}, c={c})"
        )
    pivot = math.ceil(K / R)
    if not 1 <= pivot <= K:
        raise DegenerateRobustParameters(
            f"degenerate robust parameters: pivot ceil(K/R)={pivot} outside 1..{K} (R={R:.6g})"
        )
    return R, pivot


@lru_cache(maxsize=4096)
def robust_soliton(K: int, c: float, delta: float) -> DegreeDistribution:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    R, pivot = robust_pivot(K, c, delta)
    rho = _rho(K)
    tau = [0.0] * K
    for i in range(1, pivot):
        tau[i - 1] = R / (i * K)
    tau[pivot - 1] = R * math.log(R / delta) / K
    beta = sum(r + t for r, t in zip(rho, tau))
    return _from_pmf("robust", [(r + t) / beta for r, t in zip(rho, tau)])


def make_distribution(kind: str, K: int, c: float = 0.1, delta: float = 0.5) -> DegreeDistribution:
    if kind == "ideal":
        return ideal_soliton(K)
    if kind == "robust":
        return robust_soliton(K, c, delta)
    raise ValueError(f"unknown distribution kind {kind!r}")


def degree_from_alpha(dist: DegreeDistribution, alpha: float) -> int:
    """Smallest degree d with alpha <= cdf[d-1]; intervals are right-closed."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return min(bisect_left(dist.cdf, alpha), dist.K - 1) + 1


PmfLike = Union[DegreeDistribution, Sequence[float]]


def _as_zero_based(p: PmfLike) -> list[float]:
    if isinstance(p, DegreeDistribution):
        return p.with_zero_bin()
    return [float(x) for x in p]


def tv_distance(p: PmfLike, q: PmfLike) -> float:
    """Total-variation distance between two pmfs over degrees 0..max.

    Plain sequences are read as indexed from degree 0; a DegreeDistribution is
    padded with an empty degree-0 bin. The shorter vector is zero-padded.
    """
    a, b = _as_zero_based(p), _as_zero_based(q)
    for v in (a, b):
        if abs(sum(v) - 1.0) > 1e-9:
            raise ValueError(f"pmf does not sum to 1 (sum={sum(v)!r})")
    size = max(len(a), len(b))
    a += [0.0] * (size - len(a))
    b += [0.0] * (size - len(b))
    return 0.5 * sum(abs(x - y) for x, y in zip(a, b))
