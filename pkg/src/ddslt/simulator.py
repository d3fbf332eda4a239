"""Synchronous-round dissemination engine.

A round has two phases. First every node with a non-empty forward queue pops
one packet and picks a next hop from its current transition row (the diagonal
entry is a self-loop, which still costs a hop). Then all deliveries are
processed in sender-id order. Code-degree changes mark nodes dirty; their
two-hop transition rows are refreshed once the round is over.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import protocol as pr
from .graph_gen import Graph, generate_connected_rgg, radius_for
from .transition import build_ddslt, build_uniform, local_update, two_hop


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    k: int = 10
    c1: float = 5.0
    radius_coeff: float = 2.0
    policy: str = "ddslt"
    dist_kind: str = "ideal"
    robust_c: float = 0.1
    robust_delta: float = 0.5
    payload_len: int = 16
    seed: int = 0
    snapshot_every: int = 1
    max_graph_retries: int = 100
    check_ledger: bool = False
    record_events: bool = False

    def __post_init__(self):
        if self.n < 2 or self.k < 1 or self.k > self.n:
            raise ValueError(f"need 1 <= k <= n and n >= 2, got n={self.n}, k={self.k}")
        if self.c1 <= 0 or self.radius_coeff <= 0:
            raise ValueError("c1 and radius_coeff must be positive")
        if self.policy not in pr.POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.dist_kind not in ("ideal", "robust"):
            raise ValueError(f"unknown distribution {self.dist_kind!r}")
        if self.policy == "ltcds1" and self.dist_kind != "ideal":
            raise ValueError("the LTCDS-I baseline is run with the Ideal Soliton only")
        if self.payload_len < 1 or self.snapshot_every < 1:
            raise ValueError("payload_len and snapshot_every must be positive")

    @property
    def robust_params(self) -> tuple[float, float]:
        return (self.robust_c, self.robust_delta)


@dataclass(frozen=True)
class TraceSample:
    step: int
    fraction_k_reached: float
    fraction_degree_fulfilled: float


@dataclass
class Trace:
    samples: list[TraceSample] = field(default_factory=list)
    total_transmissions: int = 0
    hops_consumed: int = 0
    rounds: int = 0
    # (step, node, new code degree) every time a node's degree moves
    degree_changes: list[tuple[int, int, int]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)

    def at_step(self, step: int) -> TraceSample:
        """Latest sample taken at or before ``step`` (state is frozen after the last round)."""
        best = None
        for s in self.samples:
            if s.step > step:
                break
            best = s
        if best is None:
            raise KeyError(step)
        return best

    def to_csv(self) -> str:
        lines = ["step,fraction_k_reached,fraction_degree_fulfilled"]
        lines += [f"{s.step},{s.fraction_k_reached!r},{s.fraction_degree_fulfilled!r}" for s in self.samples]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StoredNode:
    id: int
    xor_ids: frozenset
    buffer: bytes
    code_degree: int
    xored_count: int
    k_est: int


@dataclass(frozen=True)
class StorageSnapshot:
    nodes: tuple[StoredNode, ...]
    sources: dict  # source index -> payload bytes
    source_nodes: tuple[int, ...]  # source index -> node id

    @property
    def k(self) -> int:
        return len(self.source_nodes)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def to_json(self) -> str:
        doc = {
            "nodes": [
                {
                    "id": s.id,
                    "xor_ids": sorted(s.xor_ids),
                    "buffer_hex": s.buffer.hex(),
                    "code_degree": s.code_degree,
                    "xored_count": s.xored_count,
                    "k_est": s.k_est,
                }
                for s in self.nodes
            ],
            "sources": {str(i): self.sources[i].hex() for i in sorted(self.sources)},
            "source_nodes": list(self.source_nodes),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "StorageSnapshot":
        doc = json.loads(text)
        nodes = tuple(
            StoredNode(
                id=r["id"],
                xor_ids=frozenset(r["xor_ids"]),
                buffer=bytes.fromhex(r["buffer_hex"]),
                code_degree=r.get("code_degree", len(r["xor_ids"]) or 1),
                xored_count=r.get("xored_count", len(r["xor_ids"])),
                k_est=r.get("k_est", 0),
            )
            for r in doc["nodes"]
        )
        sources = {int(i): bytes.fromhex(h) for i, h in doc["sources"].items()}
        source_nodes = tuple(doc.get("source_nodes", sorted(sources)))
        return cls(nodes, sources, source_nodes)


def walk_length(n: int, c1: float) -> int:
    if n < 2:
        raise ValueError("walk length needs n >= 2 (ln n > 0)")
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    return math.ceil(c1 * n * math.log(n))


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))


# stream tags under the run seed
_GRAPH, _SETUP, _NODE, _UPDATE = 0, 1, 2, 3


def build_graph(cfg: SimConfig) -> Graph:
    graph_seed = int(np.random.SeedSequence([cfg.seed, _GRAPH]).generate_state(1)[0])
    return generate_connected_rgg(cfg.n, radius_for(cfg.n, cfg.radius_coeff), graph_seed, cfg.max_graph_retries)


class _Router:
    """Cumulative next-hop tables derived from a transition matrix."""

    def __init__(self, g: Graph, tp: np.ndarray):
        self.g = g
        self.tp = tp
        self.choices = [list(g.adjacency[u]) + [u] for u in range(g.n)]
        self.cum: list[list[float]] = [[] for _ in range(g.n)]
        self.refresh(range(g.n))

    def refresh(self, rows) -> None:
        for u in rows:
            acc = 0.0
            cum = []
            for v in self.choices[u]:
                acc += float(self.tp[u, v])
                cum.append(acc)
            self.cum[u] = cum

    def next_hop(self, u: int, x: float) -> int:
        cum = self.cum[u]
        i = bisect_right(cum, x * cum[-1])
        return self.choices[u][min(i, len(cum) - 1)]


def _true_xor(ids, payload_of, size: int) -> bytes:
    out = bytes(size)
    for i in ids:
        out = pr.xor_bytes(out, payload_of[i])
    return out


def run_dissemination(cfg: SimConfig, graph: Optional[Graph] = None) -> tuple[StorageSnapshot, Trace, Graph]:
    """Disseminate k source packets and return (snapshot, trace, graph)."""
    g = graph if graph is not None else build_graph(cfg)
    if g.n != cfg.n:
        raise ValueError("graph size does not match cfg.n")
    n, k = cfg.n, cfg.k
    L = walk_length(n, cfg.c1)
    ddslt = cfg.policy == "ddslt"

    setup = _stream(cfg.seed, _SETUP)
    source_nodes = [int(s) for s in setup.choice(n, size=k, replace=False)]
    alphas = setup.random(n)
    payloads = [bytes(setup.integers(0, 256, cfg.payload_len, dtype=np.uint8)) for _ in range(k)]
    payload_of = dict(zip(source_nodes, payloads))
    rngs = [_stream(cfg.seed, _NODE, u) for u in range(n)]

    k_known = None if ddslt else k
    nodes = []
    for u in range(n):
        role = pr.SOURCE if u in payload_of else pr.STORAGE
        nodes.append(pr.init_node(u, role, float(alphas[u]), payload_of.get(u), cfg.payload_len, k_known))

    if ddslt:
        degrees = [nd.code_degree for nd in nodes]
        router = _Router(g, build_ddslt(g, degrees))
    else:
        router = _Router(g, build_uniform(g))

    trace = Trace()

    def log_event(step, u, pkt_sid, sc_in, action):
        nd = nodes[u]
        trace.events.append(
            {"step": step, "node": u, "source_id": pkt_sid, "sc": sc_in, "action": action,
             "k_est": nd.k_est, "d": nd.code_degree, "Sd": nd.xored_count}
        )

    for s in source_nodes:
        pkt = pr.make_source_packet(nodes[s], L, payload_of[s])
        if not ddslt:
            action = pr.ltcds_first_visit(nodes[s], pkt, rngs[s], k)
            if cfg.record_events:
                log_event(0, s, s, 1, action)
        if pkt.hop_counter > 0:
            nodes[s].forward_queue.append(pkt)

    def sample(step: int) -> None:
        reached = sum(1 for nd in nodes if nd.k_est == k)
        done = sum(1 for nd in nodes if nd.fulfilled)
        trace.samples.append(TraceSample(step, reached / n, done / n))

    sample(0)
    active = sorted(s for s in source_nodes if nodes[s].forward_queue)
    step = 0
    while active:
        step += 1
        sends = []
        for u in active:
            pkt = nodes[u].forward_queue.popleft()
            sends.append((router.next_hop(u, rngs[u].random()), pkt))
        trace.total_transmissions += len(sends)
        dirty = []
        for v, pkt in sends:
            nd = nodes[v]
            before = nd.code_degree
            sc_in = pkt.source_counter
            hop_in = pkt.hop_counter
            if ddslt:
                action = pr.handle_receive_ddslt(nd, pkt, rngs[v], cfg.dist_kind, cfg.robust_params)
            else:
                action = pr.handle_receive_ltcds(nd, pkt, rngs[v], k, n)
            trace.hops_consumed += hop_in - pkt.hop_counter
            if cfg.record_events:
                log_event(step, v, pkt.source_id, sc_in, action)
            if nd.code_degree != before:
                trace.degree_changes.append((step, v, nd.code_degree))
                dirty.append((v, before))
            _check_receive(cfg, nd, pkt, before, payload_of)
        if ddslt and dirty:
            rows: set[int] = set()
            tp = router.tp
            current = [nd.code_degree for nd in nodes]
            first_before: dict[int, int] = {}
            for v, before in dirty:
                first_before.setdefault(v, before)
            # replay the changes one node at a time so each update is a single-node diff
            staged = list(current)
            for v, before in first_before.items():
                staged[v] = before
            for v in sorted(first_before):
                prev = list(staged)
                staged[v] = current[v]
                tp = local_update(tp, g, prev, staged)
                rows |= two_hop(g, v)
            router.tp = tp
            router.refresh(sorted(rows))
        active = [u for u in range(n) if nodes[u].forward_queue]
        if step % cfg.snapshot_every == 0 or not active:
            sample(step)
    trace.rounds = step

    for nd in nodes:
        pr.finalize_node(nd)
        if cfg.check_ledger and nd.buffer != _true_xor(nd.xor_ids, payload_of, cfg.payload_len):
            raise SimulationError(f"node {nd.node_id}: buffer disagrees with XOR over {sorted(nd.xor_ids)}")

    index_of = {s: i for i, s in enumerate(source_nodes)}
    snap = StorageSnapshot(
        nodes=tuple(
            StoredNode(
                id=nd.node_id,
                xor_ids=frozenset(index_of[s] for s in nd.xor_ids),
                buffer=nd.buffer,
                code_degree=nd.code_degree,
                xored_count=nd.xored_count,
                k_est=nd.k_est,
            )
            for nd in nodes
        ),
        sources={i: payload_of[s] for i, s in enumerate(source_nodes)},
        source_nodes=tuple(source_nodes),
    )
    return snap, trace, g


def _check_receive(cfg: SimConfig, nd: pr.NodeState, pkt: pr.Packet, degree_before: int, payload_of) -> None:
    if nd.k_est > cfg.k or pkt.source_counter > cfg.k:
        raise SimulationError(f"node {nd.node_id}: estimate {nd.k_est} / SC {pkt.source_counter} exceeds k={cfg.k}")
    if cfg.policy == "ddslt":
        if nd.xored_count > nd.code_degree:
            raise SimulationError(f"node {nd.node_id}: Sd={nd.xored_count} exceeds d={nd.code_degree}")
        if cfg.dist_kind == "ideal" and nd.code_degree < degree_before:
            raise SimulationError(f"node {nd.node_id}: code degree fell {degree_before} -> {nd.code_degree}")
    if nd.xored_count != len(nd.xor_ids):
        raise SimulationError(f"node {nd.node_id}: Sd={nd.xored_count} but {len(nd.xor_ids)} ids stored")
    if cfg.check_ledger:
        ids = set(nd.xor_ids)
        if nd.provisional_first is not None:
            ids.add(nd.provisional_first)
        if nd.buffer != _true_xor(ids, payload_of, cfg.payload_len):
            raise SimulationError(f"node {nd.node_id}: buffer disagrees with XOR over {sorted(ids)}")


def transition_for(snapshot: StorageSnapshot, g: Graph, policy: str) -> np.ndarray:
    if policy == "ddslt":
        return build_ddslt(g, [s.code_degree for s in snapshot.nodes])
    return build_uniform(g)


def update_path(snapshot: StorageSnapshot, graph: Graph, source_id: int, cfg: SimConfig) -> list[int]:
    """Nodes visited by the update walk for ``source_id``: the origin, then one entry per hop."""
    if source_id not in snapshot.sources:
        raise ValueError(f"unknown source id {source_id}")
    router = _Router(graph, transition_for(snapshot, graph, cfg.policy))
    rng = _stream(cfg.seed, _UPDATE, source_id)
    path = [snapshot.source_nodes[source_id]]
    for _ in range(walk_length(cfg.n, cfg.c1)):
        path.append(router.next_hop(path[-1], rng.random()))
    return path


def run_update_phase(
    snapshot: StorageSnapshot, graph: Graph, source_id: int, new_payload: bytes, cfg: SimConfig
) -> StorageSnapshot:
    """Walk one update packet for ``source_id`` (a source index) and return the patched snapshot.

    Each node applies a given update at most once, on the packet's first visit.
    Holders the walk never reaches keep the old contribution.
    """
    if source_id not in snapshot.sources:
        raise ValueError(f"unknown source id {source_id}")
    old = snapshot.sources[source_id]
    if len(new_payload) != len(old):
        raise ValueError("new payload length differs from the stored payload length")
    path = update_path(snapshot, graph, source_id, cfg)

    src = pr.init_node(path[0], pr.SOURCE, 0.0, old)
    pkt = pr.make_update_packet(src, old, new_payload, len(path) - 1)
    # node-level ids are source indices inside a snapshot
    pkt.source_id = source_id
    patched = {}
    for u in path:
        if u in patched:
            continue
        rec = snapshot.nodes[u]
        nd = pr.NodeState(node_id=u, role=pr.STORAGE, alpha=0.0, buffer=rec.buffer)
        nd.xor_ids = set(rec.xor_ids)
        patched[u] = pr.apply_update(nd, pkt).buffer

    nodes = tuple(
        replace(rec, buffer=patched[rec.id]) if rec.id in patched else rec for rec in snapshot.nodes
    )
    sources = dict(snapshot.sources)
    sources[source_id] = bytes(new_payload)
    return StorageSnapshot(nodes, sources, snapshot.source_nodes)
