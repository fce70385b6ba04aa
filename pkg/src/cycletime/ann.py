"""Feedforward network: tansig hidden layers, linear (purelin) output.

All parameters live in one flat vector so the trainers and the LM/BR
linear algebra share a single view of them. Layout, layer by layer from
the input side: for each neuron of the layer, its ``fan_in`` incoming
weights followed by its bias. A layer block therefore reshapes to a
``(fan_out, fan_in + 1)`` matrix whose last column holds the biases.

Predictions are computed in normalised space ([-1, 1] on every column)
and mapped back to seconds with the model's :class:`NormParams`.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, NormParams

__all__ = [
    "SCHEMA_VERSION",
    "DimensionMismatch",
    "Topology",
    "NetworkModel",
    "tansig",
    "tansig_deriv",
    "forward",
    "predict",
    "gradient",
    "jacobian",
    "init_weights",
]

SCHEMA_VERSION = 1
HIDDEN_ACTIVATION = "tansig"
OUTPUT_ACTIVATION = "purelin"


class DimensionMismatch(ValueError):
    pass


def tansig(n):
    """Hyperbolic-tangent sigmoid, 2 / (1 + exp(-2 n)) - 1."""
    n = np.asarray(n, dtype=float)
    with np.errstate(over="ignore"):
        out = 2.0 / (1.0 + np.exp(-2.0 * n)) - 1.0
    return out if out.ndim else float(out)


def tansig_deriv(a):
    """Derivative of tansig written in terms of its output ``a``."""
    return 1.0 - a * a


@dataclass(frozen=True)
class Topology:
    input_dim: int = 3
    hidden_widths: tuple = (8, 8)
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(h) for h in self.hidden_widths))
        dims = (self.input_dim, *self.hidden_widths, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer sizes must be >= 1, got {dims}")

    @property
    def sizes(self):
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def layer_shapes(self):
        """``(fan_in, fan_out)`` of every weight layer."""
        s = self.sizes
        return [(s[i], s[i + 1]) for i in range(len(s) - 1)]

    @property
    def n_weights(self):
        return sum((fi + 1) * fo for fi, fo in self.layer_shapes)

    @property
    def activations(self):
        return [HIDDEN_ACTIVATION] * len(self.hidden_widths) + [OUTPUT_ACTIVATION]

    def label(self):
        return "-".join(str(s) for s in self.sizes)


def _unpack(topology, weights):
    """Split the flat vector into per-layer ``(fan_out, fan_in + 1)`` views."""
    blocks, pos = [], 0
    for fi, fo in topology.layer_shapes:
        size = (fi + 1) * fo
        blocks.append(weights[pos:pos + size].reshape(fo, fi + 1))
        pos += size
    return blocks


@dataclass(frozen=True)
class NetworkModel:
    topology: Topology
    weights: np.ndarray
    norm: NormParams = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size != self.topology.n_weights:
            raise DimensionMismatch(
                f"topology {self.topology.label()} needs {self.topology.n_weights} weights, "
                f"got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.norm is None:
            object.__setattr__(self, "norm", NormParams.identity(self.topology.input_dim))

    def with_weights(self, weights):
        return replace(self, weights=weights)

    def layers(self):
        return _unpack(self.topology, self.weights)

    def predict(self, X, normalized=False):
        return predict(self, X, normalized)

    def to_dict(self):
        t = self.topology
        return {
            "model_kind": "ann",
            "schema_version": SCHEMA_VERSION,
            "topology": {
                "input_dim": t.input_dim,
                "hidden_widths": list(t.hidden_widths),
                "output_dim": t.output_dim,
            },
            "activations": t.activations,
            "weights": self.weights.tolist(),
            "norm_params": self.norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("model_kind") != "ann":
            raise ValueError(f"not an ANN model: model_kind={d.get('model_kind')!r}")
        t = d["topology"]
        topology = Topology(t["input_dim"], tuple(t["hidden_widths"]), t["output_dim"])
        if d.get("activations", topology.activations) != topology.activations:
            raise ValueError(f"unsupported activations {d['activations']}")
        return cls(topology, d["weights"], NormParams.from_dict(d["norm_params"]))


def _activations(topology, weights, Xn):
    """Layer outputs ``[X, h1, ..., hL, y]`` for normalised inputs."""
    acts = [Xn]
    blocks = _unpack(topology, weights)
    for k, B in enumerate(blocks):
        z = acts[-1] @ B[:, :-1].T + B[:, -1]
        acts.append(tansig(z) if k < len(blocks) - 1 else z)
    return acts


def _check_inputs(model, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.topology.input_dim:
        raise DimensionMismatch(
            f"model expects {model.topology.input_dim} inputs, got {X.shape[1]}")
    return X, single


def predict(model, X, normalized=False):
    """Batch prediction, shape ``(n,)`` for one output else ``(n, K)``.

    With ``normalized=False`` inputs are in original units and outputs in
    seconds; otherwise both sides stay in [-1, 1] space.
    """
    X, _ = _check_inputs(model, X)
    Xn = X if normalized else model.norm.scale_inputs(X)
    out = _activations(model.topology, model.weights, Xn)[-1]
    if not normalized:
        out = model.norm.unscale_targets(out)
    return out[:, 0] if model.topology.output_dim == 1 else out


def forward(model, x, normalized=False):
    """Predict a single record; returns a float for single-output nets."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("forward takes one input vector; use predict for batches")
    out = predict(model, x, normalized)[0]
    return float(out) if np.ndim(out) == 0 else out


def _batch(model, batch, normalized):
    if isinstance(batch, Dataset):
        X, y = batch.inputs, batch.targets
    else:
        X, y = batch
    X, _ = _check_inputs(model, X)
    y = np.asarray(y, dtype=float).reshape(X.shape[0], -1)
    if y.shape[1] != model.topology.output_dim:
        raise DimensionMismatch(f"targets have {y.shape[1]} outputs")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if not normalized:
        X = model.norm.scale_inputs(X)
        y = model.norm.scale_targets(y)
    return X, y


def gradient(model, batch, normalized=False):
    """Gradient of the normalised-space MSE with respect to the weights.

    ``batch`` is a :class:`Dataset` or an ``(X, y)`` pair. Plain reverse
    mode: the output error is pushed back layer by layer and each layer's
    block is accumulated as ``delta^T @ [a_prev, 1]``.
    """
    X, y = _batch(model, batch, normalized)
    return gradient_raw(model.topology, model.weights, X, y)


def jacobian(model, batch, normalized=False, return_errors=False):
    """Jacobian of the errors ``e = y - y_hat`` with respect to the weights.

    Rows are ordered sample-major then output, columns follow the flat
    weight layout. Satisfies ``gradient == (2 / rows) * J.T @ e``.
    """
    X, y = _batch(model, batch, normalized)
    J, e = jacobian_raw(model.topology, model.weights, X, y)
    return (J, e) if return_errors else J


# Array-level kernels used by the trainers: normalised X (n, d), y (n, K).

def predict_raw(topology, weights, X):
    return _activations(topology, weights, X)[-1]


def mse_raw(topology, weights, X, y):
    r = y - _activations(topology, weights, X)[-1]
    return float(np.mean(r * r))


def gradient_raw(topology, weights, X, y):
    acts = _activations(topology, weights, X)
    blocks = _unpack(topology, weights)
    delta = -2.0 * (y - acts[-1]) / y.size
    grads = []
    for k in range(len(blocks) - 1, -1, -1):
        a_prev = acts[k]
        g = np.empty_like(blocks[k])
        g[:, :-1] = delta.T @ a_prev
        g[:, -1] = delta.sum(axis=0)
        grads.append(g.ravel())
        if k:
            delta = (delta @ blocks[k][:, :-1]) * tansig_deriv(a_prev)
    return np.concatenate(grads[::-1])


def jacobian_raw(topology, weights, X, y):
    """``(J, e)`` with ``J = d e / d w`` and ``e = (y - y_hat)`` flattened."""
    acts = _activations(topology, weights, X)
    blocks = _unpack(topology, weights)
    n, K = y.shape
    # delta[i, o, j]: d y_hat[i, o] / d z_j of the current layer
    delta = np.broadcast_to(np.eye(K), (n, K, K)).copy()
    cols = []
    for k in range(len(blocks) - 1, -1, -1):
        a_aug = np.hstack([acts[k], np.ones((n, 1))])
        cols.append((delta[:, :, :, None] * a_aug[:, None, None, :]).reshape(n * K, -1))
        if k:
            delta = (delta @ blocks[k][:, :-1]) * tansig_deriv(acts[k])[:, None, :]
    return -np.hstack(cols[::-1]), (y - acts[-1]).ravel()


def init_weights(topology, seed=0, norm=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for fi, fo in topology.layer_shapes:
        bound = 1.0 / np.sqrt(fi)
        B = np.zeros((fo, fi + 1))
        B[:, :-1] = rng.uniform(-bound, bound, size=(fo, fi))
        parts.append(B.ravel())
    return NetworkModel(topology, np.concatenate(parts), norm)
