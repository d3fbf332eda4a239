"""Random geometric graphs on the unit square."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class ConnectivityBudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    radius: float
    positions: tuple[tuple[float, float], ...]
    adjacency: tuple[tuple[int, ...], ...]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "radius": self.radius,
            "positions": [list(p) for p in self.positions],
            "edges": [list(e) for e in self.edges()],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        doc = json.loads(text)
        n = doc["n"]
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in doc["edges"]:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(
            n=n,
            radius=float(doc["radius"]),
            positions=tuple((float(x), float(y)) for x, y in doc["positions"]),
            adjacency=tuple(tuple(sorted(s)) for s in nbrs),
        )

    @classmethod
    def from_edges(cls, n: int, edges, radius: float = 1.0, positions=None) -> "Graph":
        """Build a graph from an explicit edge list (positions default to the origin)."""
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise ValueError("self-edges are not allowed")
            nbrs[u].add(v)
            nbrs[v].add(u)
        if positions is None:
            positions = [(0.0, 0.0)] * n
        return cls(n, radius, tuple(tuple(p) for p in positions), tuple(tuple(sorted(s)) for s in nbrs))


def radius_for(n: int, radius_coeff: float = 2.0) -> float:
    """Transmission range r / sqrt(n)."""
    return radius_coeff / math.sqrt(n)


def adjacency_from_positions(pos: np.ndarray, radius: float) -> tuple[tuple[int, ...], ...]:
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    close = dist <= radius
    np.fill_diagonal(close, False)
    return tuple(tuple(int(v) for v in np.flatnonzero(row)) for row in close)


def generate_rgg(n: int, radius: float, seed: int) -> Graph:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    return Graph(
        n=n,
        radius=float(radius),
        positions=tuple((float(x), float(y)) for x, y in pos),
        adjacency=adjacency_from_positions(pos, radius),
    )


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    reached = 1
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if not seen[v]:
                seen[v] = True
                reached += 1
                queue.append(v)
    return reached == g.n


def generate_connected_rgg(n: int, radius: float, seed: int, max_retries: int = 100) -> Graph:
    """Rejection-sample generate_rgg over seed, seed+1, ... until connected."""
    if max_retries < 1:
        raise ValueError("max_retries must be positive")
    for attempt in range(max_retries):
        g = generate_rgg(n, radius, seed + attempt)
        if is_connected(g):
            return g
    raise ConnectivityBudgetExhausted(
        f"connectivity budget exhausted: no connected RGG(n={n}, radius={radius:.4g}) "
        f"in {max_retries} attempts from seed {seed}"
    )
