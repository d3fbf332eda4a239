"""Forwarding tables for the dissemination walks and their spectral diagnostics.

Three constructions are provided:

* ``build_ddslt``: degree-aware table, TP[u][v] = min(mu_v, mu_u * d_v / d_u) with
  mu_u = d_u / sum of neighbour code degrees. Needs only one-hop information.
* ``build_metropolis``: min(1, d_v / d_u) / D_max, where D_max is the largest
  node degree of the graph (global knowledge).
* ``build_uniform``: each neighbour with probability 1 / |N(u)|.

Matrices are dense ``numpy`` arrays and are never modified in place once returned.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .graph_gen import Graph

log = logging.getLogger(__name__)

_STOCHASTIC_TOL = 1e-9


class NotConverged(RuntimeError):
    pass


def _check_inputs(g: Graph, d: Sequence[int] | None) -> None:
    for u in range(g.n):
        if not g.adjacency[u]:
            raise ValueError(f"node {u} is isolated; transition row undefined")
    if d is not None:
        if len(d) != g.n:
            raise ValueError(f"code-degree vector has length {len(d)}, graph has {g.n} nodes")
        if min(d) < 1:
            raise ValueError("code degrees must be >= 1")


def _mu(g: Graph, d: Sequence[int], u: int) -> float:
    return d[u] / sum(d[v] for v in g.adjacency[u])


def _ddslt_row(g: Graph, d: Sequence[int], mu: Sequence[float], u: int) -> list[tuple[int, float]]:
    """Off-diagonal entries of row u plus the diagonal, in adjacency order."""
    out = []
    total = 0.0
    for v in g.adjacency[u]:
        p = min(mu[v], mu[u] * d[v] / d[u])
        out.append((v, p))
        total += p
    # the off-diagonal mass is at most 1 exactly; clamp rounding below zero
    out.append((u, max(0.0, 1.0 - total)))
    return out


def build_ddslt(g: Graph, d: Sequence[int]) -> np.ndarray:
    _check_inputs(g, d)
    mu = [_mu(g, d, u) for u in range(g.n)]
    tp = np.zeros((g.n, g.n))
    for u in range(g.n):
        for v, p in _ddslt_row(g, d, mu, u):
            tp[u, v] = p
    return tp


def build_metropolis(g: Graph, d: Sequence[int]) -> np.ndarray:
    _check_inputs(g, d)
    dmax = g.max_degree
    tp = np.zeros((g.n, g.n))
    for u in range(g.n):
        total = 0.0
        for v in g.adjacency[u]:
            p = min(1.0, d[v] / d[u]) / dmax
            tp[u, v] = p
            total += p
        tp[u, u] = max(0.0, 1.0 - total)
    return tp


def build_uniform(g: Graph) -> np.ndarray:
    _check_inputs(g, None)
    tp = np.zeros((g.n, g.n))
    for u in range(g.n):
        nb = g.adjacency[u]
        tp[u, list(nb)] = 1.0 / len(nb)
    return tp


def two_hop(g: Graph, u: int) -> set[int]:
    """{u} together with its first- and second-order neighbourhoods."""
    first = set(g.adjacency[u])
    out = {u} | first
    for v in first:
        out.update(g.adjacency[v])
    return out


def local_update(tp: np.ndarray, g: Graph, d_old: Sequence[int], d_new: Sequence[int]) -> np.ndarray:
    """Refresh a ``build_ddslt`` table after one node's code degree changed.

    Only rows within two hops of the changed node are recomputed; the result is
    bit-identical to ``build_ddslt(g, d_new)`` when ``tp`` was built from ``d_old``.
    """
    changed = [u for u in range(g.n) if d_old[u] != d_new[u]]
    if not changed:
        return tp
    if len(changed) > 1:
        raise ValueError(f"local_update handles a single changed node, got {changed}")
    c = changed[0]
    _check_inputs(g, d_new)
    rows = two_hop(g, c)
    # mu_w depends on d over N(w); it moves only for w in {c} u N(c), but the
    # rows in the second ring read mu of their neighbours, so cache per need
    need = set(rows)
    for w in rows:
        need.update(g.adjacency[w])
    mu = {w: _mu(g, d_new, w) for w in need}
    out = tp.copy()
    for u in sorted(rows):
        out[u, :] = 0.0
        for v, p in _ddslt_row(g, d_new, mu, u):
            out[u, v] = p
    return out


def is_stochastic(tp: np.ndarray, tol: float = _STOCHASTIC_TOL) -> bool:
    return bool(
        tp.ndim == 2
        and tp.shape[0] == tp.shape[1]
        and (tp >= -tol).all()
        and np.allclose(tp.sum(axis=1), 1.0, rtol=0.0, atol=tol)
    )


def _reversible_wrt(tp: np.ndarray, pi: np.ndarray, tol: float = 1e-10) -> bool:
    flow = pi[:, None] * tp
    return bool(np.allclose(flow, flow.T, rtol=0.0, atol=tol))


def _candidate_pi(tp: np.ndarray) -> np.ndarray | None:
    w, vecs = np.linalg.eig(tp.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    v = np.real(vecs[:, i])
    v = v / v.sum()
    if (v <= 0).any():
        return None
    return v


def slem(tp: np.ndarray, pi: Sequence[float] | None = None) -> float:
    """Second largest eigenvalue modulus, max(lambda_2, -lambda_n).

    When the chain is reversible with respect to a positive ``pi`` (given, or
    recovered from the Perron vector) the spectrum is taken from the symmetric
    matrix D^1/2 TP D^-1/2. Otherwise a general eigensolver is used and the
    spectrum must come out real.
    """
    tp = np.asarray(tp, dtype=float)
    if not is_stochastic(tp):
        raise ValueError("slem expects a row-stochastic square matrix")
    n = tp.shape[0]
    if n == 1:
        return 0.0
    p = np.asarray(pi, dtype=float) if pi is not None else _candidate_pi(tp)
    if p is not None and (p > 0).all() and _reversible_wrt(tp, p / p.sum()):
        s = np.sqrt(p / p.sum())
        sym = s[:, None] * tp / s[None, :]
        lam = np.sort(np.linalg.eigvalsh((sym + sym.T) / 2.0))[::-1]
    else:
        w = np.linalg.eigvals(tp)
        if np.abs(w.imag).max() > 1e-9:
            raise ValueError("non-reversible chain with complex spectrum; SLEM as defined needs real eigenvalues")
        lam = np.sort(w.real)[::-1]
    value = float(max(lam[1], -lam[-1]))
    if value >= 1.0 - 1e-12:
        log.warning("SLEM = %.12g: chain is reducible or periodic", value)
    return value


def _irreducible(tp: np.ndarray) -> bool:
    support = tp > 0
    for mat in (support, support.T):
        seen = np.zeros(len(tp), dtype=bool)
        seen[0] = True
        frontier = seen.copy()
        while frontier.any():
            frontier = mat[frontier].any(axis=0) & ~seen
            seen |= frontier
        if not seen.all():
            return False
    return True


def stationary_distribution(tp: np.ndarray, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """Power iteration until ||pi TP - pi||_1 < tol.

    Iterates the lazy chain (I + TP) / 2, which has the same stationary vector
    and cannot oscillate on periodic chains.
    """
    tp = np.asarray(tp, dtype=float)
    if not is_stochastic(tp):
        raise ValueError("stationary_distribution expects a row-stochastic square matrix")
    if not _irreducible(tp):
        raise ValueError("chain is reducible; stationary distribution is not unique")
    n = tp.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        step = pi @ tp
        if np.abs(step - pi).sum() < tol:
            return pi
        pi = 0.5 * (pi + step)
        pi /= pi.sum()
    raise NotConverged(f"power iteration did not converge in {max_iter} iterations")


def tv_after(tp: np.ndarray, pi: np.ndarray, steps: int) -> float:
    """Worst-case (over start nodes) total-variation distance to pi after ``steps`` steps."""
    pt = np.linalg.matrix_power(tp, steps)
    return float(0.5 * np.abs(pt - pi[None, :]).sum(axis=1).max())
