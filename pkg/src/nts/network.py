"""Feed-forward networks used as one-step models of discrete-time dynamics.

A network maps a stacked (state, input) vector to the next state. Layers are
affine maps followed by an elementwise activation, restricted to ReLU and
identity. Networks are immutable after construction and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Activation",
    "Layer",
    "FeedForwardNetwork",
    "ElmTrainConfig",
    "ElmTrainResult",
    "IllPosedRegressionError",
    "NetworkFormatError",
    "train_elm",
    "network_to_dict",
    "network_from_dict",
    "save_network",
    "load_network",
]


class NetworkFormatError(ValueError):
    """A network document violates the expected JSON layout."""


class IllPosedRegressionError(ValueError):
    """Unregularized readout regression with fewer samples than unknowns."""


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


_ALLOWED_ACTIVATIONS = ", ".join(repr(a.value) for a in Activation)


class Layer:
    """Affine map plus activation: x -> act(weights @ x + bias)."""

    __slots__ = ("weights", "bias", "activation")

    def __init__(self, weights, bias, activation: Activation | str):
        weights = np.array(weights, dtype=float)
        bias = np.array(bias, dtype=float)
        if weights.ndim != 2:
            raise ValueError(f"weights must be 2-D, got {weights.ndim}-D")
        if bias.ndim != 1:
            raise ValueError(f"bias must be 1-D, got {bias.ndim}-D")
        if weights.shape[0] != bias.shape[0]:
            raise ValueError(
                f"bias length {bias.shape[0]} does not match "
                f"weight rows {weights.shape[0]}"
            )
        weights.setflags(write=False)
        bias.setflags(write=False)
        self.weights = weights
        self.bias = bias
        self.activation = Activation(activation)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        z = self.weights @ x + self.bias
        if self.activation is Activation.RELU:
            return np.maximum(z, 0.0)
        return z

    def apply_batch(self, xs: np.ndarray) -> np.ndarray:
        z = xs @ self.weights.T + self.bias
        if self.activation is Activation.RELU:
            return np.maximum(z, 0.0)
        return z


class FeedForwardNetwork:
    """Immutable stack of layers evaluated in order."""

    __slots__ = ("layers", "input_dim", "output_dim")

    def __init__(self, layers, input_dim: int | None = None, output_dim: int | None = None):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].fan_in != layers[k - 1].width:
                raise ValueError(
                    f"layer {k} expects fan-in {layers[k].fan_in} "
                    f"but layer {k - 1} has width {layers[k - 1].width}"
                )
        if input_dim is not None and input_dim != layers[0].fan_in:
            raise ValueError(
                f"declared input_dim {input_dim} != first layer fan-in {layers[0].fan_in}"
            )
        if output_dim is not None and output_dim != layers[-1].width:
            raise ValueError(
                f"declared output_dim {output_dim} != last layer width {layers[-1].width}"
            )
        self.layers = layers
        self.input_dim = layers[0].fan_in
        self.output_dim = layers[-1].width

    def evaluate(self, x) -> np.ndarray:
        """Propagate a single vector through every layer."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            got = x.shape[0] if x.ndim == 1 else x.shape
            raise ValueError(f"input has length {got}, expected {self.input_dim}")
        for layer in self.layers:
            x = layer.apply(x)
        return x

    def evaluate_batch(self, xs) -> np.ndarray:
        """Propagate rows of a (n, input_dim) array through every layer."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(f"batch must have shape (n, {self.input_dim}), got {xs.shape}")
        for layer in self.layers:
            xs = layer.apply_batch(xs)
        return xs


@dataclass(frozen=True)
class ElmTrainConfig:
    """Settings for the random-hidden-layer, least-squares-readout trainer."""

    hidden_width: int
    ridge_lambda: float = 1e-6
    seed: int = 0
    hidden_weight_scale: float = 1.0

    def __post_init__(self):
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be at least 1")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")
        if self.hidden_weight_scale <= 0:
            raise ValueError("hidden_weight_scale must be positive")


@dataclass(frozen=True)
class ElmTrainResult:
    """Trained network plus the fit diagnostics of the readout regression."""

    network: FeedForwardNetwork
    rmse: float
    num_pairs: int


def train_elm(traces, cfg: ElmTrainConfig) -> ElmTrainResult:
    """Fit a two-layer network to one-step pairs pooled from ``traces``.

    The hidden ReLU layer is drawn once from a seeded uniform distribution on
    [-scale, +scale]; the identity readout solves a ridge-regularized least
    squares problem via the normal equations. With ridge_lambda == 0 the
    readout falls back to a minimum-norm least-squares solve and requires at
    least ``hidden_width`` pairs. Same traces and config give bit-identical
    networks.
    """
    inputs, targets = _one_step_pairs(traces)
    num_pairs = inputs.shape[0]
    rng = np.random.default_rng(cfg.seed)
    scale = cfg.hidden_weight_scale
    w_hidden = rng.uniform(-scale, scale, size=(cfg.hidden_width, inputs.shape[1]))
    b_hidden = rng.uniform(-scale, scale, size=cfg.hidden_width)
    hidden = Layer(w_hidden, b_hidden, Activation.RELU)

    h = np.hstack([hidden.apply_batch(inputs), np.ones((num_pairs, 1))])
    if cfg.ridge_lambda > 0:
        gram = h.T @ h + cfg.ridge_lambda * np.eye(h.shape[1])
        beta = np.linalg.solve(gram, h.T @ targets)
    else:
        if num_pairs < cfg.hidden_width:
            raise IllPosedRegressionError(
                f"{num_pairs} training pairs cannot determine a readout over "
                f"{cfg.hidden_width} hidden units without ridge regularization"
            )
        beta, *_ = np.linalg.lstsq(h, targets, rcond=None)
    readout = Layer(beta[:-1].T, beta[-1], Activation.IDENTITY)
    network = FeedForwardNetwork([hidden, readout])

    residual = h @ beta - targets
    rmse = float(np.sqrt(np.mean(residual**2)))
    return ElmTrainResult(network=network, rmse=rmse, num_pairs=num_pairs)


def _one_step_pairs(traces):
    pair_inputs = []
    pair_targets = []
    for trace in traces:
        if len(trace) < 2:
            raise ValueError("every trace needs at least two samples to form one-step pairs")
        pair_inputs.append(np.hstack([trace.states[:-1], trace.inputs[:-1]]))
        pair_targets.append(trace.states[1:])
    if not pair_inputs:
        raise ValueError("cannot train from an empty trace set")
    return np.vstack(pair_inputs), np.vstack(pair_targets)


def network_to_dict(net: FeedForwardNetwork) -> dict:
    return {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc) -> FeedForwardNetwork:
    """Build a network from a parsed JSON document.

    Raises ``NetworkFormatError`` with a JSON pointer to the offending field.
    """
    if not isinstance(doc, dict):
        raise NetworkFormatError("/: expected a JSON object")
    input_dim = _require_int(doc, "input_dim")
    output_dim = _require_int(doc, "output_dim")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise NetworkFormatError("/layers: expected a non-empty array")

    layers = []
    for i, item in enumerate(layers_doc):
        pointer = f"/layers/{i}"
        if not isinstance(item, dict):
            raise NetworkFormatError(f"{pointer}: expected an object")
        activation = item.get("activation")
        if activation not in {a.value for a in Activation}:
            raise NetworkFormatError(
                f"{pointer}/activation: unknown activation {activation!r}; "
                f"allowed values: {_ALLOWED_ACTIVATIONS}"
            )
        try:
            weights = np.array(item.get("weights"), dtype=float)
            bias = np.array(item.get("bias"), dtype=float)
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(
                f"{pointer}: weights/bias are not rectangular numeric arrays ({exc})"
            ) from exc
        try:
            layers.append(Layer(weights, bias, activation))
        except ValueError as exc:
            raise NetworkFormatError(f"{pointer}: {exc}") from exc

    try:
        return FeedForwardNetwork(layers, input_dim=input_dim, output_dim=output_dim)
    except ValueError as exc:
        raise NetworkFormatError(f"/layers: {exc}") from exc


def _require_int(doc: dict, key: str) -> int:
    if key not in doc:
        raise NetworkFormatError(f"/{key}: missing required field")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise NetworkFormatError(f"/{key}: expected an integer, got {type(value).__name__}")
    return value


def save_network(net: FeedForwardNetwork, path) -> None:
    """Write a network as JSON; floats keep full round-trip precision."""
    text = json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_network(path) -> FeedForwardNetwork:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"/: not valid JSON ({exc})") from exc
    return network_from_dict(doc)
