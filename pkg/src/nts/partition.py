"""Maximum-entropy partitioning of a working zone driven by sample counts.

The working zone is split by repeated midpoint bisection. At every round the
active partition with the longest side is bisected along that side; the split
is kept when the entropy gained by distributing the partition's samples over
the two halves reaches a threshold, otherwise the partition is retired as
final. Splitting stops once every active partition is shorter than a minimum
length. The result is a set of boxes that tiles the zone exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .reach import HyperRectangle
from .traces import TraceSet

__all__ = [
    "UndefinedEntropyError",
    "CannotPartitionError",
    "MePartitionConfig",
    "PartitionSet",
    "shannon_entropy",
    "bisection_gain",
    "me_partition",
    "partitions_to_dict",
    "partitions_from_dict",
    "save_partitions",
    "load_partitions",
]


class UndefinedEntropyError(ValueError):
    """Entropy of an all-zero count vector is undefined."""


class CannotPartitionError(ValueError):
    """No sample falls inside the working zone."""


@dataclass(frozen=True)
class MePartitionConfig:
    """Entropy gain threshold (bits) and minimum partition side length."""

    entropy_threshold: float
    min_length: float

    def __post_init__(self):
        if self.entropy_threshold <= 0:
            raise ValueError("entropy_threshold must be positive")
        if self.min_length <= 0:
            raise ValueError("min_length must be positive")


def shannon_entropy(counts) -> float:
    """Entropy in bits of the empirical distribution given by ``counts``.

    Zero counts contribute nothing; an all-zero vector has no distribution
    and raises ``UndefinedEntropyError``.
    """
    counts = np.atleast_1d(np.asarray(counts, dtype=float))
    if counts.size == 0:
        raise UndefinedEntropyError("entropy of an empty count vector is undefined")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total == 0:
        raise UndefinedEntropyError("entropy is undefined when all counts are zero")
    p = counts[counts > 0] / total
    return float(-(p @ np.log2(p)))


def bisection_gain(n1: int, n2: int) -> float:
    """Entropy gained (bits) by splitting n1 + n2 samples into two halves.

    Algebraically equal to ``shannon_entropy([n1, n2])``; empty halves
    contribute nothing, so a degenerate split gains 0 bits.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("counts must be nonnegative")
    total = n1 + n2
    if total < 1:
        raise ValueError("at least one sample is required")
    acc = 0.0
    for n in (n1, n2):
        if n > 0:
            acc += n * math.log2(total / n)
    return acc / total


class PartitionSet:
    """Boxes with stable integer ids tiling a working zone.

    Construction validates the tiling: every box inside the zone, pairwise
    interior-disjoint, and total volume equal to the zone volume (within
    1e-9 relative).
    """

    __slots__ = ("boxes", "ids", "working_zone", "_index")

    def __init__(self, boxes, working_zone: HyperRectangle, ids=None):
        boxes = tuple(boxes)
        if not boxes:
            raise ValueError("a partition set needs at least one partition")
        if ids is None:
            ids = tuple(range(1, len(boxes) + 1))
        else:
            ids = tuple(int(i) for i in ids)
            if len(ids) != len(boxes):
                raise ValueError("ids and partitions must have the same length")
            if len(set(ids)) != len(ids):
                raise ValueError("partition ids must be unique")
        order = np.argsort(ids, kind="stable")
        boxes = tuple(boxes[i] for i in order)
        ids = tuple(ids[i] for i in order)

        for pid, box in zip(ids, boxes):
            if box.dim != working_zone.dim:
                raise ValueError(f"partition {pid} has dimension {box.dim}, zone has {working_zone.dim}")
            if not (np.all(working_zone.lower <= box.lower) and np.all(box.upper <= working_zone.upper)):
                raise ValueError(f"partition {pid} is not contained in the working zone")
        for a in range(len(boxes)):
            for b in range(a + 1, len(boxes)):
                if _interiors_overlap(boxes[a], boxes[b]):
                    raise ValueError(f"partitions {ids[a]} and {ids[b]} overlap")
        zone_volume = working_zone.volume
        total = sum(box.volume for box in boxes)
        if abs(total - zone_volume) > 1e-9 * zone_volume + 1e-12:
            raise ValueError(
                f"partitions cover volume {total}, working zone has {zone_volume}"
            )

        self.boxes = boxes
        self.ids = ids
        self.working_zone = working_zone
        self._index = {pid: i for i, pid in enumerate(ids)}

    def __len__(self):
        return len(self.boxes)

    def items(self):
        return zip(self.ids, self.boxes)

    def index_of(self, pid: int) -> int:
        if pid not in self._index:
            raise KeyError(f"unknown partition id {pid}")
        return self._index[pid]

    def box(self, pid: int) -> HyperRectangle:
        return self.boxes[self.index_of(pid)]

    def locate(self, x) -> int | None:
        """Id of the partition containing ``x`` (half-open rule), else None."""
        x = np.asarray(x, dtype=float)
        zone_upper = self.working_zone.upper
        for pid, box in self.items():
            upper_closed = box.upper == zone_upper
            if np.all(box.lower <= x) and np.all(
                np.where(upper_closed, x <= box.upper, x < box.upper)
            ):
                return pid
        return None


def _interiors_overlap(a: HyperRectangle, b: HyperRectangle) -> bool:
    return bool(np.all(np.maximum(a.lower, b.lower) < np.minimum(a.upper, b.upper)))


def me_partition(
    traces: TraceSet, working_zone: HyperRectangle, cfg: MePartitionConfig
) -> PartitionSet:
    """Maximum-entropy bisection of the working zone around the sampled states.

    Every round selects the active partition with the longest side (ties:
    lowest id, then lowest dimension index), bisects it at the midpoint of
    that side, and keeps the split iff the entropy gain over the partition's
    own samples reaches ``cfg.entropy_threshold``; otherwise the partition is
    retired. The loop stops when the longest active side drops below
    ``cfg.min_length``. Deterministic for fixed inputs.
    """
    if not (np.all(np.isfinite(working_zone.lower)) and np.all(np.isfinite(working_zone.upper))):
        raise ValueError("working zone must have finite bounds")
    states = traces.all_states()
    if states.size and states.shape[1] != working_zone.dim:
        raise ValueError(
            f"traces have state dimension {states.shape[1]}, zone has {working_zone.dim}"
        )
    if states.size:
        in_zone = np.all(states >= working_zone.lower, axis=1) & np.all(
            states <= working_zone.upper, axis=1
        )
        states = states[in_zone]
    if states.size == 0:
        raise CannotPartitionError("no sample lies inside the working zone")

    # entries: id -> (lower, upper, indices of samples inside)
    active: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {
        0: (working_zone.lower.copy(), working_zone.upper.copy(), np.arange(states.shape[0]))
    }
    retired: list[tuple[np.ndarray, np.ndarray]] = []
    next_id = 1

    while active:
        best_id = best_dim = -1
        best_len = -np.inf
        for pid in sorted(active):
            lo, hi, _ = active[pid]
            widths = hi - lo
            k = int(np.argmax(widths))
            if widths[k] > best_len:
                best_id, best_len, best_dim = pid, widths[k], k
        if best_len < cfg.min_length:
            break

        lo, hi, idx = active.pop(best_id)
        mid = (lo[best_dim] + hi[best_dim]) / 2.0
        coords = states[idx, best_dim]
        left_idx = idx[coords < mid]
        right_idx = idx[coords >= mid]
        n1, n2 = len(left_idx), len(right_idx)
        gain = bisection_gain(n1, n2) if n1 + n2 >= 1 else 0.0
        if gain >= cfg.entropy_threshold:
            left_hi = hi.copy()
            left_hi[best_dim] = mid
            right_lo = lo.copy()
            right_lo[best_dim] = mid
            active[next_id] = (lo, left_hi, left_idx)
            active[next_id + 1] = (right_lo, hi, right_idx)
            next_id += 2
        else:
            retired.append((lo, hi))

    final = [(lo, hi) for lo, hi, _ in active.values()] + retired
    final.sort(key=lambda bounds: tuple(bounds[0]))
    boxes = [HyperRectangle(lo, hi) for lo, hi in final]
    return PartitionSet(boxes, working_zone)


def partitions_to_dict(parts: PartitionSet) -> dict:
    return {
        "working_zone": {
            "lower": parts.working_zone.lower.tolist(),
            "upper": parts.working_zone.upper.tolist(),
        },
        "partitions": [
            {"id": pid, "lower": box.lower.tolist(), "upper": box.upper.tolist()}
            for pid, box in parts.items()
        ],
    }


def partitions_from_dict(doc) -> PartitionSet:
    if not isinstance(doc, dict):
        raise ValueError("partition document must be a JSON object")
    try:
        zone = HyperRectangle(doc["working_zone"]["lower"], doc["working_zone"]["upper"])
        entries = doc["partitions"]
        ids = [item["id"] for item in entries]
        boxes = [HyperRectangle(item["lower"], item["upper"]) for item in entries]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed partition document: {exc}") from exc
    return PartitionSet(boxes, zone, ids=ids)


def save_partitions(parts: PartitionSet, path) -> None:
    text = json.dumps(partitions_to_dict(parts), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_partitions(path) -> PartitionSet:
    return partitions_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
