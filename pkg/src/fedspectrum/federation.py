"""Model exchange: neighbor gossip, coordinator FedAvg, traffic accounting.

Every transferred model costs ``16 + 8 * param_count`` bytes (4-byte sender
id, 4-byte round index, 8-byte sample count, then float64 coefficients).
Rounds are synchronous: all merges read the models as they were when the
round started.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .sensing import ModelParams

if TYPE_CHECKING:
    from .scenario import Placement

HEADER_BYTES = 16

TOPOLOGIES = ("isolated", "gossip", "central")
WEIGHTINGS = ("uniform", "samples", "inverse_distance")


class KindMismatchError(ValueError):
    """Models of different kinds cannot be averaged."""


class NonpositiveDistanceError(ValueError):
    """Inverse-distance weighting needs strictly positive link distances."""


class EmptyUpdatesError(ValueError):
    """FedAvg was called with no updates."""


@dataclass
class FederationConfig:
    topology: str = "isolated"
    neighbor_radius_m: float = 300.0
    weighting: str = "samples"
    include_self_weight: bool = True


@dataclass
class FederationMessage:
    sender_id: int
    receiver_id: int
    round: int
    payload_bytes: int


@dataclass
class NeighborGraph:
    """Symmetric radio-range graph over the sensor nodes, no self loops."""

    adjacency: dict[int, list[int]]
    distances: dict[int, list[float]]

    @property
    def n_edges(self) -> int:
        return sum(len(v) for v in self.adjacency.values()) // 2

    def degree(self, node_id: int) -> int:
        return len(self.adjacency[node_id])

    def sum_degrees(self) -> int:
        return sum(len(v) for v in self.adjacency.values())


@dataclass
class TrafficStats:
    """Byte counters for one or more federation rounds."""

    tx_bytes: dict[int, int] = field(default_factory=dict)
    rx_bytes: dict[int, int] = field(default_factory=dict)
    central_bytes: int = 0
    total_bytes: int = 0
    messages: int = 0

    def add(self, other: "TrafficStats") -> None:
        for node, b in other.tx_bytes.items():
            self.tx_bytes[node] = self.tx_bytes.get(node, 0) + b
        for node, b in other.rx_bytes.items():
            self.rx_bytes[node] = self.rx_bytes.get(node, 0) + b
        self.central_bytes += other.central_bytes
        self.total_bytes += other.total_bytes
        self.messages += other.messages

    def node_bytes(self, node_id: int) -> int:
        return self.tx_bytes.get(node_id, 0) + self.rx_bytes.get(node_id, 0)


def payload_bytes(param_count: int) -> int:
    return HEADER_BYTES + 8 * param_count


def build_neighbor_graph(
    placements: Sequence["Placement"], radius_m: float
) -> NeighborGraph:
    """Connect every pair of sensors within ``radius_m`` of each other."""
    nodes = sorted(placements, key=lambda p: p.node_id)
    adjacency: dict[int, list[int]] = {p.node_id: [] for p in nodes}
    distances: dict[int, list[float]] = {p.node_id: [] for p in nodes}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            d = math.hypot(a.x_m - b.x_m, a.y_m - b.y_m)
            if d <= radius_m:
                adjacency[a.node_id].append(b.node_id)
                distances[a.node_id].append(d)
                adjacency[b.node_id].append(a.node_id)
                distances[b.node_id].append(d)
    return NeighborGraph(adjacency, distances)


def _check_kinds(kinds: Sequence[str]) -> str:
    first = kinds[0]
    for k in kinds[1:]:
        if k != first:
            raise KindMismatchError(
                f"kind: cannot merge {k!r} into {first!r} models"
            )
    return first


def merge_models(
    own: ModelParams,
    received: Sequence[tuple[ModelParams, float]],
    cfg: FederationConfig,
) -> ModelParams:
    """Convex combination of the own model and the received ones.

    Weights before normalization: ``uniform`` gives 1 to every contributor,
    ``samples`` gives ``max(n_train_samples, 1)``, ``inverse_distance`` gives
    the own model 1 and each received model ``1/distance``.  With
    ``include_self_weight`` false the own model gets weight 0 (its sample
    count still participates in the resulting counter).  An empty ``received``
    returns ``own`` unchanged.
    """
    if not received:
        return own
    _check_kinds([own.kind] + [m.kind for m, _ in received])
    if cfg.weighting == "uniform":
        own_w = 1.0
        recv_w = [1.0] * len(received)
    elif cfg.weighting == "samples":
        own_w = float(max(own.n_train_samples, 1))
        recv_w = [float(max(m.n_train_samples, 1)) for m, _ in received]
    elif cfg.weighting == "inverse_distance":
        for _, d in received:
            if d <= 0.0:
                raise NonpositiveDistanceError(
                    f"distance: inverse_distance weighting needs d > 0 (got {d})"
                )
        own_w = 1.0
        recv_w = [1.0 / d for _, d in received]
    else:
        raise ValueError(
            f"weighting: unknown mode {cfg.weighting!r} (expected one of {WEIGHTINGS})"
        )
    if not cfg.include_self_weight:
        own_w = 0.0
    total = own_w + sum(recv_w)
    theta = own.theta * (own_w / total)
    for (m, _), w in zip(received, recv_w):
        theta = theta + m.theta * (w / total)
    n_max = max([own.n_train_samples] + [m.n_train_samples for m, _ in received])
    return ModelParams(own.kind, theta, n_max)


def gossip_round(
    states: Sequence[ModelParams],
    graph: NeighborGraph,
    placements: Sequence["Placement"],
    cfg: FederationConfig,
    round_index: int,
) -> tuple[list[ModelParams], list[FederationMessage]]:
    """One synchronous gossip round.

    Every node sends its current model to every neighbor; every node with at
    least one neighbor replaces its model by the merge of its own pre-round
    snapshot with everything it received and resets its sample counter (the
    contribution has been consumed).  Nodes without neighbors are untouched.
    Messages come out sorted by (sender, receiver).  ``states`` must be
    indexed by sensor node id.
    """
    ids = sorted(graph.adjacency)
    if not ids:
        return list(states), []
    _check_kinds([states[i].kind for i in ids])
    pb = payload_bytes(len(states[ids[0]].theta))
    messages = [
        FederationMessage(i, j, round_index, pb)
        for i in ids
        for j in graph.adjacency[i]
    ]
    new_states: list[ModelParams] = list(states)
    for i in ids:
        neighbors = graph.adjacency[i]
        if not neighbors:
            continue
        received = [
            (states[j], d) for j, d in zip(neighbors, graph.distances[i])
        ]
        merged = merge_models(states[i], received, cfg)
        new_states[i] = ModelParams(merged.kind, merged.theta, 0)
    return new_states, messages


def fedavg_aggregate(updates: Sequence[ModelParams]) -> ModelParams:
    """Sample-count-weighted average; empty counters weigh as one sample."""
    if len(updates) == 0:
        raise EmptyUpdatesError("updates: nothing to aggregate")
    kind = _check_kinds([m.kind for m in updates])
    counts = [max(m.n_train_samples, 1) for m in updates]
    n = sum(counts)
    theta = np.zeros_like(updates[0].theta)
    for m, c in zip(updates, counts):
        theta += m.theta * (c / n)
    return ModelParams(kind, theta, n)


def central_round(
    states: Sequence[ModelParams],
    cfg: FederationConfig,
    round_index: int,
    central_id: int,
) -> tuple[list[ModelParams], ModelParams, TrafficStats]:
    """One collect/average/distribute round through the coordinator.

    All nodes uplink their model, the coordinator aggregates with FedAvg and
    downlinks the identical global model to everyone; sample counters reset.

    Returns:
        (replaced node models, global model, traffic for this round)
    """
    global_model = fedavg_aggregate(states)
    pb = payload_bytes(len(global_model.theta))
    messages = [
        FederationMessage(i, central_id, round_index, pb)
        for i in range(len(states))
    ]
    messages += [
        FederationMessage(central_id, i, round_index, pb)
        for i in range(len(states))
    ]
    new_states = [
        ModelParams(global_model.kind, global_model.theta.copy(), 0) for _ in states
    ]
    return new_states, global_model, traffic_of_round(messages, central_id)


def traffic_of_round(
    messages: Sequence[FederationMessage], central_id: int
) -> TrafficStats:
    """Aggregate per-node and total byte counters for a batch of messages."""
    stats = TrafficStats()
    for msg in messages:
        stats.tx_bytes[msg.sender_id] = (
            stats.tx_bytes.get(msg.sender_id, 0) + msg.payload_bytes
        )
        stats.rx_bytes[msg.receiver_id] = (
            stats.rx_bytes.get(msg.receiver_id, 0) + msg.payload_bytes
        )
        stats.total_bytes += msg.payload_bytes
        stats.messages += 1
    stats.central_bytes = stats.tx_bytes.get(central_id, 0) + stats.rx_bytes.get(
        central_id, 0
    )
    return stats
