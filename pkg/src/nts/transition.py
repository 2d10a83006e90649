"""Transition systems over a partitioned working zone.

The transition matrix marks an edge i -> j whenever the set-valued image of
partition i (crossed with the input set) touches partition j, so no behavior
of the network is ever missed; over-approximation can only add edges.
Self-loops are pruned when the sampled traces never dwell long inside the
partition, and transitions are additionally certified for the true dynamics
when the epsilon-inflated image still fits inside the target partition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import FeedForwardNetwork
from .partition import (
    MePartitionConfig,
    PartitionSet,
    me_partition,
    partitions_from_dict,
    partitions_to_dict,
)
from .reach import HyperRectangle, contains, inflate, intersects, interval_evaluate, no_input
from .traces import TraceSet, max_dwell

__all__ = [
    "SelfLoopConfig",
    "TransitionSystem",
    "reachable_boxes",
    "compute_transitions",
    "reduce_self_loops",
    "guaranteed_transitions",
    "build_abstraction",
    "export_dot",
    "transition_system_to_dict",
    "transition_system_from_dict",
    "save_transition_system",
    "load_transition_system",
]


@dataclass(frozen=True)
class SelfLoopConfig:
    """Dwell threshold above which a self-loop counts as evidence of an invariant set."""

    dwell_threshold: int

    def __post_init__(self):
        if self.dwell_threshold < 1:
            raise ValueError("dwell_threshold must be at least 1")


class TransitionSystem:
    """Partitions plus boolean transition and guaranteed-transition matrices.

    Matrix rows/columns follow the partition order of ``partition_set``
    (ascending ids). Immutable once built; every guaranteed edge is also a
    transition edge.
    """

    __slots__ = ("partition_set", "transitions", "guaranteed", "input_set", "metadata")

    def __init__(self, partition_set, transitions, guaranteed=None, input_set=None, metadata=None):
        n = len(partition_set)
        transitions = np.array(transitions, dtype=bool)
        if transitions.shape != (n, n):
            raise ValueError(f"transition matrix must be {n}x{n}, got {transitions.shape}")
        if guaranteed is None:
            guaranteed = np.zeros((n, n), dtype=bool)
        else:
            guaranteed = np.array(guaranteed, dtype=bool)
            if guaranteed.shape != (n, n):
                raise ValueError(f"guaranteed matrix must be {n}x{n}, got {guaranteed.shape}")
        if np.any(guaranteed & ~transitions):
            raise ValueError("guaranteed transitions must be a subset of transitions")
        transitions.setflags(write=False)
        guaranteed.setflags(write=False)
        self.partition_set = partition_set
        self.transitions = transitions
        self.guaranteed = guaranteed
        self.input_set = input_set if input_set is not None else no_input()
        self.metadata = dict(metadata) if metadata else {}

    @property
    def n(self) -> int:
        return len(self.partition_set)

    def edge_count(self) -> int:
        return int(self.transitions.sum())

    def edges(self):
        """(id_i, id_j) pairs in row-major order."""
        ids = self.partition_set.ids
        for i, j in zip(*np.nonzero(self.transitions)):
            yield ids[i], ids[j]


def reachable_boxes(net: FeedForwardNetwork, parts: PartitionSet, input_set=None):
    """One-step set-valued image of every partition crossed with the input set."""
    input_set = input_set if input_set is not None else no_input()
    n_x = parts.working_zone.dim
    if net.output_dim != n_x:
        raise ValueError(f"network outputs {net.output_dim} dims, partitions have {n_x}")
    if n_x + input_set.dim != net.input_dim:
        raise ValueError(
            f"state dim {n_x} + input dim {input_set.dim} != network input {net.input_dim}"
        )
    return [interval_evaluate(net, box.cross(input_set)) for box in parts.boxes]


def compute_transitions(net: FeedForwardNetwork, parts: PartitionSet, input_set=None) -> np.ndarray:
    """Boolean matrix with e_ij set iff the image of partition i touches partition j.

    Partition boxes are treated as closed for the intersection test, so
    boundary contact counts; this keeps the matrix an over-approximation of
    the network's true one-step behavior.
    """
    images = reachable_boxes(net, parts, input_set)
    n = len(parts)
    matrix = np.zeros((n, n), dtype=bool)
    for i, image in enumerate(images):
        for j, target in enumerate(parts.boxes):
            matrix[i, j] = intersects(image, target)
    return matrix


def guaranteed_transitions(
    net: FeedForwardNetwork, parts: PartitionSet, input_set=None, epsilon: float = 0.0
) -> np.ndarray:
    """Edges certified to exist for any dynamics within ``epsilon`` of the net.

    An edge i -> j is guaranteed when the epsilon-inflated image of
    partition i is contained in partition j (closed); any map whose outputs
    stay within epsilon of the network then also sends partition i into
    partition j.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    images = reachable_boxes(net, parts, input_set)
    n = len(parts)
    matrix = np.zeros((n, n), dtype=bool)
    for i, image in enumerate(images):
        grown = inflate(image, epsilon)
        for j, target in enumerate(parts.boxes):
            matrix[i, j] = contains(target, grown)
    return matrix


def reduce_self_loops(ts: TransitionSystem, traces: TraceSet, cfg: SelfLoopConfig) -> TransitionSystem:
    """Drop self-loops that the sampled traces never support.

    A self-loop is removed when no trace stays inside the partition for more
    than ``cfg.dwell_threshold`` consecutive samples, i.e. the loop is an
    artifact of the sampling rate rather than evidence of an invariant set.
    Self-loops that are guaranteed transitions are kept regardless: the
    contained inflated image proves the partition maps into itself, which no
    finite dwell statistic can refute. Off-diagonal entries are never
    touched.
    """
    transitions = np.array(ts.transitions)
    zone = ts.partition_set.working_zone
    for i, box in enumerate(ts.partition_set.boxes):
        if not transitions[i, i] or ts.guaranteed[i, i]:
            continue
        if max_dwell(traces, box, zone=zone) <= cfg.dwell_threshold:
            transitions[i, i] = False
    metadata = dict(ts.metadata)
    metadata["dwell_n"] = cfg.dwell_threshold
    return TransitionSystem(
        ts.partition_set, transitions, ts.guaranteed, ts.input_set, metadata
    )


def build_abstraction(
    net: FeedForwardNetwork,
    traces: TraceSet,
    working_zone: HyperRectangle,
    me_cfg: MePartitionConfig,
    input_set: HyperRectangle | None,
    selfloop_cfg: SelfLoopConfig,
    epsilon: float = 0.0,
) -> TransitionSystem:
    """Full pipeline: partition, compute transitions, prune self-loops, certify.

    Metadata records the thresholds used and the ids of partitions whose row
    ended up empty (their image leaves the working zone entirely).
    """
    input_set = input_set if input_set is not None else no_input()
    parts = me_partition(traces, working_zone, me_cfg)
    transitions = compute_transitions(net, parts, input_set)
    guaranteed = guaranteed_transitions(net, parts, input_set, epsilon)
    base = TransitionSystem(parts, transitions, guaranteed, input_set)
    reduced = reduce_self_loops(base, traces, selfloop_cfg)
    out_rows = [
        parts.ids[i] for i in range(len(parts)) if not reduced.transitions[i].any()
    ]
    metadata = {
        "entropy": me_cfg.entropy_threshold,
        "l_min": me_cfg.min_length,
        "dwell_n": selfloop_cfg.dwell_threshold,
        "epsilon": epsilon,
        "out_rows": out_rows,
    }
    return TransitionSystem(parts, reduced.transitions, guaranteed, input_set, metadata)


def export_dot(ts: TransitionSystem) -> str:
    """Render the system as a DOT digraph.

    One node per partition named ``P<id>``; one edge per transition in
    row-major id order. Guaranteed edges carry ``color=red, style=bold``.
    """
    lines = ["digraph transition_system {"]
    for pid in ts.partition_set.ids:
        lines.append(f"  P{pid};")
    ids = ts.partition_set.ids
    for i in range(ts.n):
        for j in range(ts.n):
            if not ts.transitions[i, j]:
                continue
            if ts.guaranteed[i, j]:
                lines.append(f"  P{ids[i]} -> P{ids[j]} [color=red, style=bold];")
            else:
                lines.append(f"  P{ids[i]} -> P{ids[j]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def transition_system_to_dict(ts: TransitionSystem) -> dict:
    doc = partitions_to_dict(ts.partition_set)
    doc["input_set"] = {
        "lower": ts.input_set.lower.tolist(),
        "upper": ts.input_set.upper.tolist(),
    }
    doc["transitions"] = ts.transitions.astype(int).tolist()
    doc["guaranteed"] = ts.guaranteed.astype(int).tolist()
    doc["metadata"] = dict(ts.metadata)
    return doc


def transition_system_from_dict(doc) -> TransitionSystem:
    parts = partitions_from_dict(doc)
    try:
        input_doc = doc.get("input_set", {"lower": [], "upper": []})
        input_set = HyperRectangle(input_doc["lower"], input_doc["upper"])
        transitions = doc["transitions"]
        guaranteed = doc.get("guaranteed")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed transition-system document: {exc}") from exc
    return TransitionSystem(
        parts, transitions, guaranteed, input_set, doc.get("metadata", {})
    )


def save_transition_system(ts: TransitionSystem, path) -> None:
    text = json.dumps(transition_system_to_dict(ts), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_transition_system(path) -> TransitionSystem:
    return transition_system_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
