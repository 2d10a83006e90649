"""Sampled trajectories: simulation, partition segmentation, dwell, CSV I/O.

A trace is a finite run of (step, state, input) samples with strictly
consecutive step indices. A trace set pools traces sharing the same state
and input dimensions.

CSV format: header ``trace_id,step,x1..x{n_x},u1..u{n_u}``, rows sorted by
(trace_id, step), UTF-8, ``.`` decimal separator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import FeedForwardNetwork
from .reach import HyperRectangle

__all__ = [
    "Trace",
    "TraceSet",
    "SegmentSet",
    "TraceFormatError",
    "UniformInputPolicy",
    "simulate",
    "segment",
    "max_dwell",
    "save_traces_csv",
    "load_traces_csv",
]


class TraceFormatError(ValueError):
    """A trace CSV file violates the expected layout."""


class Trace:
    """One sampled run; ``states`` is (m, n_x), ``inputs`` is (m, n_u)."""

    __slots__ = ("states", "inputs", "steps")

    def __init__(self, states, inputs=None, steps=None):
        states = np.array(states, dtype=float, ndmin=2)
        if inputs is None:
            inputs = np.zeros((states.shape[0], 0))
        else:
            inputs = np.array(inputs, dtype=float)
            if inputs.ndim == 1:
                inputs = inputs.reshape(states.shape[0], -1) if inputs.size else inputs.reshape(states.shape[0], 0)
        if inputs.shape[0] != states.shape[0]:
            raise ValueError(
                f"got {states.shape[0]} states but {inputs.shape[0]} inputs"
            )
        if steps is None:
            steps = np.arange(states.shape[0])
        else:
            steps = np.array(steps, dtype=int)
            if steps.shape != (states.shape[0],):
                raise ValueError("step indices must match the number of samples")
            if steps.size > 1 and not np.all(np.diff(steps) == 1):
                raise ValueError("step indices must be strictly consecutive")
        for arr in (states, inputs, steps):
            arr.setflags(write=False)
        self.states = states
        self.inputs = inputs
        self.steps = steps

    @property
    def n_x(self) -> int:
        return self.states.shape[1]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.states.shape[0]

    def sample(self, i):
        return int(self.steps[i]), self.states[i], self.inputs[i]

    def samples(self):
        """Iterate (step, state, input) triples in order."""
        for i in range(len(self)):
            yield self.sample(i)


class TraceSet:
    """Immutable collection of traces with matching dimensions."""

    __slots__ = ("traces", "n_x", "n_u")

    def __init__(self, traces):
        traces = tuple(traces)
        if traces:
            n_x, n_u = traces[0].n_x, traces[0].n_u
            for i, tr in enumerate(traces):
                if tr.n_x != n_x or tr.n_u != n_u:
                    raise ValueError(
                        f"trace {i} has dims ({tr.n_x}, {tr.n_u}), expected ({n_x}, {n_u})"
                    )
        else:
            n_x = n_u = None
        self.traces = traces
        self.n_x = n_x
        self.n_u = n_u

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def __getitem__(self, i):
        return self.traces[i]

    @property
    def num_samples(self) -> int:
        return sum(len(tr) for tr in self.traces)

    def all_states(self) -> np.ndarray:
        if not self.traces:
            return np.zeros((0, 0))
        return np.vstack([tr.states for tr in self.traces])


@dataclass(frozen=True)
class UniformInputPolicy:
    """Inputs drawn independently and uniformly from a box, per trace and step."""

    box: HyperRectangle
    seed: int


def simulate(net: FeedForwardNetwork, initial_states, horizon: int, input_policy=None) -> TraceSet:
    """Roll the network forward from each initial state for ``horizon`` steps.

    The state dimension is the network's output width; whatever input width
    remains is fed from ``input_policy``:

    - ``None``: zero inputs,
    - a vector (n_u,): the same constant input at every step,
    - an array (horizon+1, n_u): one input per step, shared by all traces,
    - an array (len(initial_states), horizon+1, n_u): per trace and step,
    - ``UniformInputPolicy``: seeded uniform draws from a box.

    Every sample carries an input; the one attached to the last sample is
    drawn like the others but never applied.
    """
    n_x = net.output_dim
    n_u = net.input_dim - net.output_dim
    if n_u < 0:
        raise ValueError("network input dimension is smaller than its state dimension")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    initial = np.array(initial_states, dtype=float, ndmin=2)
    if initial.ndim != 2 or initial.shape[1] != n_x:
        raise ValueError(f"initial states must have shape (k, {n_x}), got {initial.shape}")
    if not np.all(np.isfinite(initial)):
        raise ValueError("initial states must be finite")

    num = initial.shape[0]
    all_inputs = _materialize_inputs(input_policy, num, horizon, n_u)
    traces = []
    for ell in range(num):
        states = np.empty((horizon + 1, n_x))
        states[0] = initial[ell]
        for k in range(horizon):
            states[k + 1] = net.evaluate(np.concatenate([states[k], all_inputs[ell, k]]))
        traces.append(Trace(states, inputs=all_inputs[ell]))
    return TraceSet(traces)


def _materialize_inputs(policy, num_traces, horizon, n_u) -> np.ndarray:
    shape = (num_traces, horizon + 1, n_u)
    if policy is None:
        return np.zeros(shape)
    if isinstance(policy, UniformInputPolicy):
        if policy.box.dim != n_u:
            raise ValueError(f"input box has dimension {policy.box.dim}, expected {n_u}")
        rng = np.random.default_rng(policy.seed)
        span = policy.box.upper - policy.box.lower
        return policy.box.lower + rng.random(shape) * span
    arr = np.asarray(policy, dtype=float)
    if arr.shape == (n_u,):
        return np.broadcast_to(arr, shape).copy()
    if arr.shape == (horizon + 1, n_u):
        return np.broadcast_to(arr, shape).copy()
    if arr.shape == shape:
        return arr.copy()
    raise ValueError(
        f"input policy shape {arr.shape} fits neither ({n_u},), "
        f"({horizon + 1}, {n_u}) nor {shape}"
    )


class SegmentSet:
    """Assignment of in-zone samples to partitions.

    ``assignments[q]`` lists (trace_index, sample_index) pairs for partition
    ``q`` in the order the partitions were given; samples matching no
    partition are only counted.
    """

    __slots__ = ("assignments", "counts", "out_of_zone", "total_samples")

    def __init__(self, assignments, out_of_zone, total_samples):
        self.assignments = tuple(tuple(a) for a in assignments)
        self.counts = np.array([len(a) for a in self.assignments])
        self.counts.setflags(write=False)
        self.out_of_zone = out_of_zone
        self.total_samples = total_samples


def _upper_closed_masks(boxes, zone):
    """Which upper faces of each box coincide with the zone's top face."""
    if zone is not None:
        zone_upper = zone.upper
    else:
        zone_upper = np.max(np.vstack([b.upper for b in boxes]), axis=0)
    return [b.upper == zone_upper for b in boxes]


def segment(traces: TraceSet, partitions, zone: HyperRectangle | None = None) -> SegmentSet:
    """Assign each sampled state to the partition containing it.

    Membership is half-open, [lower, upper), except on upper faces lying on
    the working zone's top face, which stay closed; this makes assignment
    unique for partitions that tile the zone. When ``zone`` is omitted its
    top face is taken as the componentwise maximum of the partition uppers.
    Overlapping partitions (double assignment) raise ``ValueError``.
    """
    boxes = list(partitions)
    total = traces.num_samples
    if boxes and traces.n_x is not None and boxes[0].dim != traces.n_x:
        raise ValueError(
            f"partitions have dimension {boxes[0].dim}, traces have {traces.n_x}"
        )
    if not boxes or total == 0:
        return SegmentSet([[] for _ in boxes], out_of_zone=total, total_samples=total)

    masks = _upper_closed_masks(boxes, zone)
    assignments = [[] for _ in boxes]
    assigned_total = 0
    for ti, trace in enumerate(traces):
        states = trace.states
        taken = np.zeros(len(trace), dtype=bool)
        for q, (box, upper_closed) in enumerate(zip(boxes, masks)):
            ge_lower = np.all(states >= box.lower, axis=1)
            below = np.where(upper_closed, states <= box.upper, states < box.upper)
            member = ge_lower & np.all(below, axis=1)
            overlap = member & taken
            if np.any(overlap):
                raise ValueError(
                    "partitions overlap under the half-open convention "
                    f"(trace {ti}, sample {int(np.argmax(overlap))})"
                )
            taken |= member
            assignments[q].extend((ti, int(si)) for si in np.nonzero(member)[0])
        assigned_total += int(taken.sum())
    return SegmentSet(assignments, out_of_zone=total - assigned_total, total_samples=total)


def max_dwell(traces: TraceSet, partition: HyperRectangle, zone: HyperRectangle | None = None) -> int:
    """Longest run of consecutive samples staying inside the partition.

    Uses the same half-open membership as ``segment``; pass ``zone`` to close
    the faces lying on the working zone's top face. Returns 0 when no sample
    ever visits the partition.
    """
    if zone is not None:
        upper_closed = partition.upper == zone.upper
    else:
        upper_closed = np.zeros(partition.dim, dtype=bool)
    best = 0
    for trace in traces:
        states = trace.states
        ge_lower = np.all(states >= partition.lower, axis=1)
        below = np.where(upper_closed, states <= partition.upper, states < partition.upper)
        member = ge_lower & np.all(below, axis=1)
        best = max(best, _longest_run(member))
    return best


def _longest_run(mask: np.ndarray) -> int:
    longest = current = 0
    for flag in mask:
        current = current + 1 if flag else 0
        longest = max(longest, current)
    return longest


def save_traces_csv(traces: TraceSet, path) -> None:
    """Write a trace set as CSV; floats keep full round-trip precision."""
    n_x = traces.n_x if traces.n_x is not None else 0
    n_u = traces.n_u if traces.n_u is not None else 0
    header = (
        ["trace_id", "step"]
        + [f"x{i + 1}" for i in range(n_x)]
        + [f"u{i + 1}" for i in range(n_u)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for tid, trace in enumerate(traces):
            for i in range(len(trace)):
                row = [tid, int(trace.steps[i])]
                row += [repr(float(v)) for v in trace.states[i]]
                row += [repr(float(v)) for v in trace.inputs[i]]
                writer.writerow(row)


def load_traces_csv(path) -> TraceSet:
    """Read a trace CSV, grouping rows by trace id in ascending id order."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        n_x, n_u = _parse_header(path, header)
        width = 2 + n_x + n_u

        grouped: dict[int, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise TraceFormatError(
                    f"{path}, row {lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                tid = int(row[0])
                step = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise TraceFormatError(f"{path}, row {lineno}: {exc}") from exc
            grouped.setdefault(tid, []).append((lineno, step, values))

    traces = []
    for tid in sorted(grouped):
        rows = grouped[tid]
        for (prev_line, prev_step, _), (lineno, step, _) in zip(rows, rows[1:]):
            if step != prev_step + 1:
                raise TraceFormatError(
                    f"{path}, row {lineno}: trace {tid} jumps from step "
                    f"{prev_step} to {step}; steps must be consecutive"
                )
        states = np.array([v[:n_x] for _, _, v in rows])
        inputs = np.array([v[n_x:] for _, _, v in rows]).reshape(len(rows), n_u)
        steps = np.array([s for _, s, _ in rows])
        traces.append(Trace(states, inputs=inputs, steps=steps))
    return TraceSet(traces)


def _parse_header(path, header) -> tuple[int, int]:
    if len(header) < 2 or header[0] != "trace_id" or header[1] != "step":
        raise TraceFormatError(f"{path}: header must start with trace_id,step")
    n_x = n_u = 0
    rest = header[2:]
    for name in rest:
        if name == f"x{n_x + 1}" and n_u == 0:
            n_x += 1
        elif name == f"u{n_u + 1}":
            n_u += 1
        else:
            raise TraceFormatError(
                f"{path}: unexpected column {name!r}; expected x1..xN then u1..uM"
            )
    if n_x == 0:
        raise TraceFormatError(f"{path}: at least one state column x1 is required")
    return n_x, n_u
