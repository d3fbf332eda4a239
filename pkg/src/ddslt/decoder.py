"""GF(2) rank oracle and LT peeling decoder for storage snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .protocol import xor_bytes

CRITERIA = ("rank", "peel")


@dataclass
class EncodedSet:
    k: int
    rows: list[tuple[frozenset, bytes]] = field(default_factory=list)


@dataclass
class DecodeResult:
    recovered: dict[int, bytes]
    method: str = "peeling"
    # (resolved source id, number of input rows that had been consumed when it resolved)
    peel_steps: list[tuple[int, int]] = field(default_factory=list)


def pack(ids: Iterable[int]) -> int:
    mask = 0
    for i in ids:
        mask |= 1 << i
    return mask


def gf2_rank(rows: Sequence[Iterable[int]], k: int) -> int:
    """Rank over GF(2) of the rows (each a set of column ids < k)."""
    basis: list[int] = []  # reduced rows, each with a distinct leading bit
    for r in rows:
        v = pack(r)
        if v >> k:
            raise ValueError(f"row {sorted(r)} has ids >= k={k}")
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
            basis.sort(reverse=True)
    return len(basis)


def peel_decode(enc: EncodedSet) -> DecodeResult:
    """Belief-propagation (peeling) decode, processing rows online in input order.

    Rows are fed one at a time; after each arrival every newly degree-one row is
    resolved and substituted until nothing changes. ``peel_steps`` records when
    each source became known, which measures the online-decoding behaviour.
    """
    recovered: dict[int, bytes] = {}
    steps: list[tuple[int, int]] = []
    pending: list[list] = []  # [unresolved id set, payload]
    for count, (ids, payload) in enumerate(enc.rows, start=1):
        ids = set(ids)
        for i in ids & recovered.keys():
            payload = xor_bytes(payload, recovered[i])
        ids -= recovered.keys()
        if not ids:
            continue
        pending.append([ids, payload])
        progress = True
        while progress:
            progress = False
            for row in pending:
                if len(row[0]) != 1:
                    continue
                (sid,) = row[0]
                recovered[sid] = row[1]
                steps.append((sid, count))
                for other in pending:
                    if sid in other[0]:
                        other[0].discard(sid)
                        other[1] = xor_bytes(other[1], recovered[sid])
                progress = True
            pending = [row for row in pending if row[0]]
    return DecodeResult(recovered, "peeling", steps)


def snapshot_rows(snapshot, nodes: Iterable[int]) -> list[tuple[frozenset, bytes]]:
    """Rows contributed by the given node ids; empty nodes add nothing."""
    out = []
    for u in nodes:
        rec = snapshot.nodes[u]
        if rec.xor_ids:
            out.append((rec.xor_ids, rec.buffer))
    return out


def subset_size(eta: float, k: int) -> int:
    """h = eta * k rounded half-up."""
    return int(math.floor(eta * k + 0.5))


def _success(rows, k: int, criterion: str) -> bool:
    if criterion == "rank":
        return gf2_rank([ids for ids, _ in rows], k) == k
    return len(peel_decode(EncodedSet(k, rows)).recovered) == k


def decoding_curve(snapshot, etas: Sequence[float], trials: int, seed: int, criterion: str = "rank") -> list[float]:
    """Success probability at each eta, using one node permutation per trial for every eta.

    Sharing the permutation makes the h-subsets nested across the grid, so the
    curve is non-decreasing for any seed.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if trials < 1:
        raise ValueError("trials must be positive")
    n, k = snapshot.n, snapshot.k
    sizes = [subset_size(e, k) for e in etas]
    for e, h in zip(etas, sizes):
        if e < 0:
            raise ValueError(f"eta must be >= 0, got {e}")
        if h > n:
            raise ValueError(f"eta={e} asks for h={h} nodes but only {n} exist")
    rng = np.random.default_rng(seed)
    wins = [0] * len(sizes)
    for _ in range(trials):
        perm = rng.permutation(n)
        for j, h in enumerate(sizes):
            if h >= k and _success(snapshot_rows(snapshot, perm[:h]), k, criterion):
                wins[j] += 1
    return [w / trials for w in wins]


def decoding_probability(snapshot, eta: float, trials: int, seed: int, criterion: str = "rank") -> float:
    return decoding_curve(snapshot, [eta], trials, seed, criterion)[0]
