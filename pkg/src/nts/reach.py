"""Axis-aligned boxes and sound set-valued network evaluation.

Set-valued evaluation uses interval bound propagation: an affine layer maps
the box center exactly and the radius through the absolute weight matrix,
ReLU clamps both bounds at zero. The result always contains the true image
of the input box; it may over-approximate once the box has passed through
more than one layer, because coordinate dependencies are dropped between
layers. For a single affine layer (with or without ReLU) the bounds are the
exact per-coordinate image interval, up to the round-off margin described
in ``interval_evaluate``.

Boxes are closed sets here; touching boundaries count as intersection. The
half-open membership used for assigning samples to partitions lives in
``contains_point_half_open`` and is driven by an explicit mask of which
upper faces stay closed.
"""

from __future__ import annotations

import numpy as np

from .network import Activation, FeedForwardNetwork

__all__ = [
    "HyperRectangle",
    "ReachTube",
    "no_input",
    "interval_evaluate",
    "reach_tube",
    "inflate",
    "intersects",
    "contains",
    "contains_point_half_open",
]


class HyperRectangle:
    """Closed axis-aligned box given by lower and upper corner vectors.

    Zero-dimensional boxes (empty corners) are allowed and act as the
    neutral element of ``cross``; they model systems without external input.
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.array(lower, dtype=float))
        upper = np.atleast_1d(np.array(upper, dtype=float))
        if lower.ndim != 1 or upper.ndim != 1:
            raise ValueError("box corners must be vectors")
        if lower.shape != upper.shape:
            raise ValueError(
                f"corner lengths differ: lower has {lower.shape[0]}, upper has {upper.shape[0]}"
            )
        if not np.all(lower <= upper):
            raise ValueError("lower corner exceeds upper corner in some dimension")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower = lower
        self.upper = upper

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def radius(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths)) if self.dim else 1.0

    def cross(self, other: "HyperRectangle") -> "HyperRectangle":
        """Cartesian product, concatenating dimensions."""
        return HyperRectangle(
            np.concatenate([self.lower, other.lower]),
            np.concatenate([self.upper, other.upper]),
        )

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lower.shape:
            raise ValueError(f"point has dimension {x.shape}, box has {self.dim}")
        return bool(np.all(self.lower <= x) and np.all(x <= self.upper))

    def __eq__(self, other):
        if not isinstance(other, HyperRectangle):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(
            self.upper, other.upper
        )

    def __repr__(self):
        return f"HyperRectangle({self.lower.tolist()}, {self.upper.tolist()})"


def no_input() -> HyperRectangle:
    """The zero-dimensional input set of an autonomous system."""
    return HyperRectangle(np.zeros(0), np.zeros(0))


class ReachTube:
    """Boxes over-approximating the state set at steps 0..K."""

    __slots__ = ("steps",)

    def __init__(self, steps):
        steps = tuple(steps)
        if not steps:
            raise ValueError("a reach tube needs at least the initial box")
        dim = steps[0].dim
        for k, box in enumerate(steps):
            if box.dim != dim:
                raise ValueError(f"step {k} has dimension {box.dim}, expected {dim}")
        self.steps = steps

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, k):
        return self.steps[k]

    def __iter__(self):
        return iter(self.steps)


_EPS = float(np.finfo(float).eps)


def interval_evaluate(net: FeedForwardNetwork, input_box: HyperRectangle) -> HyperRectangle:
    """Box containing the image of every point of ``input_box`` under the net.

    Each affine layer adds an outward margin bounding the worst-case
    accumulated round-off of both the interval arithmetic and any pointwise
    evaluation, so containment holds in floating point, not just in exact
    arithmetic. The margin is a few units in the last place of the layer's
    dynamic range and never matters at the scale of the boxes themselves.
    """
    if input_box.dim != net.input_dim:
        raise ValueError(
            f"input box has dimension {input_box.dim}, network expects {net.input_dim}"
        )
    lo = input_box.lower
    hi = input_box.upper
    for layer in net.layers:
        center = (lo + hi) / 2.0
        radius = (hi - lo) / 2.0
        abs_w = np.abs(layer.weights)
        mapped_center = layer.weights @ center + layer.bias
        mapped_radius = abs_w @ radius
        dot_magnitude = abs_w @ np.maximum(np.abs(lo), np.abs(hi)) + np.abs(layer.bias)
        roundoff = _EPS * (2 * layer.fan_in + 8) * dot_magnitude
        lo = mapped_center - mapped_radius - roundoff
        hi = mapped_center + mapped_radius + roundoff
        if layer.activation is Activation.RELU:
            lo = np.maximum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
    return HyperRectangle(lo, hi)


def reach_tube(
    net: FeedForwardNetwork,
    initial_box: HyperRectangle,
    input_set: HyperRectangle | None,
    horizon: int,
) -> ReachTube:
    """Iterate ``interval_evaluate`` over the crossed state and input boxes."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if input_set is None:
        input_set = no_input()
    if initial_box.dim != net.output_dim:
        raise ValueError(
            f"initial box has dimension {initial_box.dim}, state dimension is {net.output_dim}"
        )
    if initial_box.dim + input_set.dim != net.input_dim:
        raise ValueError(
            f"state dim {initial_box.dim} + input dim {input_set.dim} "
            f"!= network input {net.input_dim}"
        )
    steps = [initial_box]
    for _ in range(horizon):
        steps.append(interval_evaluate(net, steps[-1].cross(input_set)))
    return ReachTube(steps)


def inflate(box: HyperRectangle, epsilon: float) -> HyperRectangle:
    """Grow the box by epsilon on every face."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return HyperRectangle(box.lower - epsilon, box.upper + epsilon)


def _check_same_dim(a: HyperRectangle, b: HyperRectangle) -> None:
    if a.dim != b.dim:
        raise ValueError(f"box dimensions differ: {a.dim} vs {b.dim}")


def intersects(a: HyperRectangle, b: HyperRectangle) -> bool:
    """Closed-box intersection; a shared boundary point counts."""
    _check_same_dim(a, b)
    return bool(
        np.all(np.maximum(a.lower, b.lower) <= np.minimum(a.upper, b.upper))
    )


def contains(outer: HyperRectangle, inner: HyperRectangle) -> bool:
    """Componentwise closed containment of ``inner`` in ``outer``."""
    _check_same_dim(outer, inner)
    return bool(np.all(outer.lower <= inner.lower) and np.all(inner.upper <= outer.upper))


def contains_point_half_open(
    box: HyperRectangle, x, upper_closed: np.ndarray | None = None
) -> bool:
    """Membership in [lower, upper), closing the upper faces flagged in the mask.

    ``upper_closed`` marks dimensions whose upper face belongs to the box,
    which is how partitions sitting on the working zone's top face keep their
    boundary samples.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise ValueError(f"point has dimension {x.shape}, box has {box.dim}")
    if not np.all(box.lower <= x):
        return False
    if upper_closed is None:
        return bool(np.all(x < box.upper))
    below = np.where(upper_closed, x <= box.upper, x < box.upper)
    return bool(np.all(below))
