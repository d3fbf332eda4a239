"""Per-node state machines: DDSLT and the LTCDS-I baseline.

Receive handlers mutate the node and the packet in place. Each returns the
XOR action taken for the trace log: ``hold`` (first packet kept provisionally),
``accept``, ``reject`` (Bernoulli failed) or ``skip`` (no Bernoulli was run).
After the action the receiver decrements the hop counter and queues the
packet for forwarding unless the walk has ended.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .soliton import DegenerateRobustParameters, degree_from_alpha, ideal_soliton, make_distribution

SOURCE = "source"
STORAGE = "storage"
POLICIES = ("ddslt", "ltcds1")


class RandomSource(Protocol):
    def random(self) -> float: ...


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"payload length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(n, "big")


@dataclass
class Packet:
    source_id: int
    hop_counter: int
    source_counter: int
    update_flag: bool
    payload: bytes


@dataclass
class NodeState:
    node_id: int
    role: str
    alpha: float
    buffer: bytes
    k_est: int = 0
    code_degree: int = 1
    xored_count: int = 0
    sources_seen: int = 0
    seen_ids: set = field(default_factory=set)
    xor_ids: set = field(default_factory=set)
    provisional_first: Optional[int] = None
    provisional_payload: Optional[bytes] = None
    # the "first packet" slot has been used (held, resolved, or the node is a source)
    first_taken: bool = False
    forward_queue: deque = field(default_factory=deque)

    @property
    def fulfilled(self) -> bool:
        return self.xored_count == self.code_degree


def init_node(
    node_id: int,
    role: str,
    alpha: float,
    payload: bytes | None = None,
    payload_len: int = 16,
    k_known: int | None = None,
) -> NodeState:
    """Default variables of a node before dissemination.

    With ``k_known`` set the node is an LTCDS-I node: its code degree is drawn
    once from the Ideal Soliton over k and the estimate is pinned to k.
    Under DDSLT a source starts out holding its own packet (Sd = SN = k' = 1).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if role not in (SOURCE, STORAGE):
        raise ValueError(f"unknown role {role!r}")
    if role == SOURCE and payload is None:
        raise ValueError("a source node needs its payload")
    size = len(payload) if payload is not None else payload_len
    node = NodeState(node_id=node_id, role=role, alpha=alpha, buffer=bytes(size))
    if k_known is not None:
        node.k_est = k_known
        node.code_degree = degree_from_alpha(ideal_soliton(k_known), alpha)
        return node
    if role == SOURCE:
        node.k_est = 1
        node.sources_seen = 1
        node.xored_count = 1
        node.seen_ids = {node_id}
        node.xor_ids = {node_id}
        node.buffer = bytes(payload)
        node.first_taken = True
    return node


def make_source_packet(node: NodeState, walk_len: int, payload: bytes) -> Packet:
    if node.role != SOURCE:
        raise ValueError(f"node {node.node_id} is a storage node and cannot originate packets")
    if walk_len < 0:
        raise ValueError("walk length must be non-negative")
    return Packet(node.node_id, walk_len, 1, False, bytes(payload))


def make_update_packet(node: NodeState, old_payload: bytes, new_payload: bytes, walk_len: int) -> Packet:
    if node.role != SOURCE:
        raise ValueError(f"node {node.node_id} is a storage node and cannot originate updates")
    return Packet(node.node_id, walk_len, 1, True, xor_bytes(old_payload, new_payload))


def distribution_for(kind: str, K: int, robust_params: tuple[float, float] = (0.1, 0.5)):
    """Soliton over K; Robust parameters that degenerate at small K fall back to Ideal."""
    if kind == "robust":
        try:
            return make_distribution("robust", K, *robust_params)
        except DegenerateRobustParameters:
            return ideal_soliton(K)
    return make_distribution(kind, K)


def update_code_degree(node: NodeState, dist_kind: str = "ideal", robust_params=(0.1, 0.5)) -> NodeState:
    if node.k_est < 1:
        raise ValueError(f"node {node.node_id} has no estimate of k yet")
    dist = distribution_for(dist_kind, node.k_est, robust_params)
    node.code_degree = degree_from_alpha(dist, node.alpha)
    return node


def _bernoulli(node: NodeState, rng: RandomSource) -> bool:
    return rng.random() < node.code_degree / node.k_est


def _accept(node: NodeState, source_id: int, payload: bytes) -> None:
    node.buffer = xor_bytes(node.buffer, payload)
    node.xor_ids.add(source_id)
    node.xored_count += 1


def _forward(node: NodeState, pkt: Packet) -> None:
    pkt.hop_counter -= 1
    if pkt.hop_counter > 0:
        node.forward_queue.append(pkt)


def _ddslt_xor(node: NodeState, pkt: Packet, rng: RandomSource) -> str:
    sid = pkt.source_id
    if not node.first_taken:
        node.first_taken = True
        node.provisional_first = sid
        node.provisional_payload = pkt.payload
        node.buffer = pkt.payload
        return "hold"
    if node.provisional_first is not None:
        if sid == node.provisional_first:
            return "skip"
        # first packet from a second distinct source: settle the held packet first
        held = node.provisional_first
        node.provisional_first = node.provisional_payload = None
        if _bernoulli(node, rng):
            node.xor_ids.add(held)
            node.xored_count = 1
        else:
            node.buffer = bytes(len(node.buffer))
    if node.xored_count < node.code_degree and sid not in node.xor_ids:
        if _bernoulli(node, rng):
            _accept(node, sid, pkt.payload)
            return "accept"
        return "reject"
    return "skip"


def handle_receive_ddslt(
    node: NodeState, pkt: Packet, rng: RandomSource, dist_kind: str = "ideal", robust_params=(0.1, 0.5)
) -> str:
    """Counter maintenance, code-degree update, XOR decision, then hop bookkeeping."""
    if pkt.source_id not in node.seen_ids:
        node.seen_ids.add(pkt.source_id)
        node.sources_seen += 1
    est = max(node.k_est, node.sources_seen, pkt.source_counter)
    node.k_est = est
    pkt.source_counter = est
    update_code_degree(node, dist_kind, robust_params)
    action = _ddslt_xor(node, pkt, rng)
    _forward(node, pkt)
    return action


def ltcds_first_visit(node: NodeState, pkt: Packet, rng: RandomSource, k_known: int) -> str:
    """LTCDS-I acceptance: one Bernoulli with probability d/k on a packet's first visit only."""
    if pkt.source_id in node.seen_ids:
        return "skip"
    node.seen_ids.add(pkt.source_id)
    node.sources_seen += 1
    if rng.random() < node.code_degree / k_known:
        _accept(node, pkt.source_id, pkt.payload)
        return "accept"
    return "reject"


def handle_receive_ltcds(node: NodeState, pkt: Packet, rng: RandomSource, k_known: int, n_known: int) -> str:
    # n only fixes the walk length, which the origin already stamped into the packet
    del n_known
    action = ltcds_first_visit(node, pkt, rng, k_known)
    _forward(node, pkt)
    return action


def apply_update(node: NodeState, pkt: Packet) -> NodeState:
    """XOR the (old xor new) delta into the buffer if this node stores the source."""
    if not pkt.update_flag:
        raise ValueError("apply_update expects an update packet")
    if pkt.source_id in node.xor_ids:
        node.buffer = xor_bytes(node.buffer, pkt.payload)
    return node


def finalize_node(node: NodeState) -> NodeState:
    """End of dissemination: a still-provisional first packet is kept for good."""
    if node.provisional_first is not None:
        node.xor_ids.add(node.provisional_first)
        node.xored_count = 1
        node.provisional_first = node.provisional_payload = None
    return node
