"""Feed-forward target classifier with a loss-prediction head, trained by hand-written backprop.

The target model is a rectifier MLP with a softmax output. The uncertainty
head reads every hidden activation vector, projects each through its own
fully connected layer (+ rectifier) to ``head_width`` units, concatenates
the projections and maps them to one scalar: the predicted loss G(x).

Both are trained jointly on

    mean cross-entropy + lam * (2 / N_b) * sum over pairs of hinge(G)

where a batch of N_b samples is split into N_b / 2 consecutive pairs and the
hinge asks the pair's predicted losses to be ordered like its true losses,
with margin ``margin``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from confcoreset.errors import FormatError, SelectionError, SpecError
from confcoreset.rng import Xoshiro256

PROB_FLOOR = 1e-12
CHECKPOINT_MAGIC = "confcoreset-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Mlp:
    """Weights ``W[k]`` have shape ``(out, in)``; biases shape ``(out,)``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def hidden_sizes(self) -> list[int]:
        return self.layer_sizes[1:-1]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class UncertaintyHead:
    """One ``(width, hidden_k)`` projection per hidden layer, then a linear readout."""

    proj_weights: list[np.ndarray]
    proj_biases: list[np.ndarray]
    out_weight: np.ndarray
    out_bias: np.ndarray  # shape (1,)

    @property
    def width(self) -> int:
        return self.proj_weights[0].shape[0] if self.proj_weights else 0

    def copy(self) -> "UncertaintyHead":
        return UncertaintyHead(
            [w.copy() for w in self.proj_weights],
            [b.copy() for b in self.proj_biases],
            self.out_weight.copy(),
            self.out_bias.copy(),
        )

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.proj_weights, self.proj_biases):
            out += [w, b]
        return out + [self.out_weight, self.out_bias]


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (64, 32)
    head_width: int = 16
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 32
    lam: float = 1.0
    margin: float = 0.5
    seed: int = 0
    detach_head_gradient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise SpecError("need at least one hidden layer of positive width")
        if self.head_width < 1:
            raise SpecError("head_width must be positive")
        if not self.learning_rate > 0:
            raise SpecError("learning_rate must be positive")
        if self.epochs < 1:
            raise SpecError("epochs must be positive")
        if self.batch_size < 2 or self.batch_size % 2:
            raise SpecError("batch_size must be an even number >= 2")
        if self.lam < 0:
            raise SpecError("lam must be non-negative")
        if not self.margin > 0:
            raise SpecError("margin must be positive")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass
class ForwardTrace:
    """Batch forward pass. ``post[0]`` is the input, ``post[1:]`` the hidden activations."""

    pre: list[np.ndarray]
    post: list[np.ndarray]
    logits: np.ndarray
    probs: np.ndarray

    @property
    def hidden(self) -> list[np.ndarray]:
        return self.post[1:]


@dataclass
class HeadTrace:
    pre: list[np.ndarray]
    post: list[np.ndarray]
    concat: np.ndarray
    output: np.ndarray


def _relu(x):
    return np.maximum(x, 0.0)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _uniform(rng: Xoshiro256, shape, limit: float) -> np.ndarray:
    return rng.uniforms(int(np.prod(shape)), -limit, limit).reshape(shape)


def init_params(layer_sizes, head_width: int, seed: int) -> tuple[Mlp, UncertaintyHead]:
    """He-uniform weights, zero biases; fully determined by ``seed``."""
    rng = Xoshiro256(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(_uniform(rng, (fan_out, fan_in), math.sqrt(6.0 / fan_in)))
        biases.append(np.zeros(fan_out))
    proj_w, proj_b = [], []
    for size in layer_sizes[1:-1]:
        proj_w.append(_uniform(rng, (head_width, size), math.sqrt(6.0 / size)))
        proj_b.append(np.zeros(head_width))
    concat = head_width * len(proj_w)
    out_w = _uniform(rng, (concat,), math.sqrt(6.0 / concat)) if concat else np.zeros(0)
    return Mlp(weights, biases), UncertaintyHead(proj_w, proj_b, out_w, np.zeros(1))


def _as_batch(mlp: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != mlp.layer_sizes[0]:
        raise SelectionError(f"input dimension mismatch: expected {mlp.layer_sizes[0]}")
    return x


def mlp_forward(mlp: Mlp, x) -> ForwardTrace:
    """Forward pass for one d-vector or an (N, d) batch."""
    a = _as_batch(mlp, x)
    pre, post = [], [a]
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        pre.append(z)
        if k < last:
            a = _relu(z)
            post.append(a)
    logits = pre[-1]
    return ForwardTrace(pre, post, logits, _softmax(logits))


def cross_entropy(probs, y) -> np.ndarray:
    """-ln p_y per row, with p_y floored at 1e-12."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if len(y) != len(probs) or np.any(y < 0) or np.any(y >= probs.shape[1]):
        raise SelectionError("invalid label")
    p_y = probs[np.arange(len(y)), y]
    return -np.log(np.maximum(p_y, PROB_FLOOR))


def _head_trace(head: UncertaintyHead, hidden: list[np.ndarray]) -> HeadTrace:
    if len(hidden) != len(head.proj_weights):
        raise SelectionError("head expects one projection per hidden layer")
    pre, post = [], []
    for a, w, b in zip(hidden, head.proj_weights, head.proj_biases):
        if a.shape[1] != w.shape[1]:
            raise SelectionError("hidden width does not match head projection")
        q = a @ w.T + b
        pre.append(q)
        post.append(_relu(q))
    n = hidden[0].shape[0] if hidden else 1
    concat = np.concatenate(post, axis=1) if post else np.zeros((n, 0))
    output = concat @ head.out_weight + head.out_bias[0]
    return HeadTrace(pre, post, concat, output)


def head_forward(head: UncertaintyHead, trace: ForwardTrace) -> np.ndarray | float:
    """Predicted loss G(x); a float for a single-sample trace, else one value per row."""
    out = _head_trace(head, trace.hidden).output
    return float(out[0]) if len(out) == 1 else out


def margin_pair_loss(lhat_1: float, lhat_2: float, l_1: float, l_2: float, xi: float) -> float:
    """Hinge on the predicted-loss difference, signed by which true loss is larger."""
    f = 1.0 if l_1 > l_2 else -1.0
    return max(0.0, -f * (lhat_1 - lhat_2) + xi)


def joint_loss_value(target_losses, predicted_losses, lam: float, margin: float) -> float:
    """Joint objective from per-sample target and predicted losses (consecutive pairs)."""
    l = np.asarray(target_losses, dtype=np.float64)
    lhat = np.asarray(predicted_losses, dtype=np.float64)
    if len(l) % 2 or len(l) != len(lhat) or not len(l):
        raise SpecError("need an even, non-empty batch")
    n_b = len(l)
    pair = sum(
        margin_pair_loss(lhat[i], lhat[i + 1], l[i], l[i + 1], margin) for i in range(0, n_b, 2)
    )
    return float(l.mean() + lam * (2.0 / n_b) * pair)


def joint_batch_loss(mlp: Mlp, head: UncertaintyHead, x, y, config: TrainConfig):
    """Joint loss on one batch and its gradients.

    Returns ``(total, mlp_grad, head_grad)``; the gradients are ``Mlp`` and
    ``UncertaintyHead`` instances with parameter-shaped arrays. True losses
    only decide the sign of each pair's hinge, so they carry no gradient.
    """
    x = _as_batch(mlp, x)
    y = np.asarray(y, dtype=np.int64)
    n_b = len(x)
    if n_b % 2 or n_b == 0:
        raise SpecError("batch size must be even")
    if len(y) != n_b:
        raise SelectionError("labels and inputs differ in length")
    trace = mlp_forward(mlp, x)
    ht = _head_trace(head, trace.hidden)
    ce = cross_entropy(trace.probs, y)
    lhat = ht.output

    first, second = slice(0, None, 2), slice(1, None, 2)
    sign = np.where(ce[first] > ce[second], 1.0, -1.0)
    arg = -sign * (lhat[first] - lhat[second]) + config.margin
    active = arg > 0
    total = ce.mean() + config.lam * (2.0 / n_b) * np.where(active, arg, 0.0).sum()

    # readout gradient of the pair term
    scale = config.lam * 2.0 / n_b
    d_lhat = np.zeros(n_b)
    d_lhat[first] = np.where(active, -sign * scale, 0.0)
    d_lhat[second] = np.where(active, sign * scale, 0.0)

    g_out_w = ht.concat.T @ d_lhat
    g_out_b = np.array([d_lhat.sum()])
    d_concat = np.outer(d_lhat, head.out_weight)
    g_proj_w, g_proj_b, d_hidden_from_head = [], [], []
    offset = 0
    for a, w, q in zip(trace.hidden, head.proj_weights, ht.pre):
        width = w.shape[0]
        d_q = d_concat[:, offset:offset + width] * (q > 0)
        offset += width
        g_proj_w.append(d_q.T @ a)
        g_proj_b.append(d_q.sum(axis=0))
        d_hidden_from_head.append(d_q @ w)

    # target branch; rows whose p_y sits on the floor contribute nothing
    p_y = trace.probs[np.arange(n_b), y]
    d_logits = trace.probs.copy()
    d_logits[np.arange(n_b), y] -= 1.0
    d_logits[p_y < PROB_FLOOR] = 0.0
    d_logits /= n_b

    g_w = [None] * len(mlp.weights)
    g_b = [None] * len(mlp.biases)
    d_z = d_logits
    for k in range(len(mlp.weights) - 1, -1, -1):
        g_w[k] = d_z.T @ trace.post[k]
        g_b[k] = d_z.sum(axis=0)
        if k == 0:
            break
        d_a = d_z @ mlp.weights[k]
        if not config.detach_head_gradient:
            d_a = d_a + d_hidden_from_head[k - 1]
        d_z = d_a * (trace.pre[k - 1] > 0)

    return (
        float(total),
        Mlp(g_w, g_b),
        UncertaintyHead(g_proj_w, g_proj_b, g_out_w, g_out_b),
    )


def _batches(order: list[int], batch_size: int):
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        if len(chunk) % 2:
            chunk = chunk[:-1]
        if chunk:
            yield chunk


def train(features, labels, labeled_indices, config: TrainConfig, num_classes: int | None = None):
    """Train target model and head from scratch with plain minibatch SGD.

    Each epoch shuffles the labeled set; a trailing odd sample of a chunk is
    dropped for that epoch so every batch splits into pairs.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = [int(i) for i in labeled_indices]
    if len(idx) < 2:
        raise SpecError("training needs at least 2 labeled samples")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    sizes = [features.shape[1], *config.hidden, num_classes]
    rng = Xoshiro256(config.seed)
    mlp, head = init_params(sizes, config.head_width, rng.next_u64())
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(idx)
        for chunk in _batches(order, config.batch_size):
            _, g_mlp, g_head = joint_batch_loss(mlp, head, features[chunk], labels[chunk], config)
            for p, g in zip(mlp.arrays(), g_mlp.arrays()):
                p -= lr * g
            for p, g in zip(head.arrays(), g_head.arrays()):
                p -= lr * g
    return mlp, head


def _rows(features, indices) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if indices is None:
        return features
    return features[np.asarray(indices, dtype=np.int64)]


def predict_proba(mlp: Mlp, features, indices=None) -> np.ndarray:
    return mlp_forward(mlp, _rows(features, indices)).probs


def predict_uncertainty(mlp: Mlp, head: UncertaintyHead, features, indices=None) -> np.ndarray:
    trace = mlp_forward(mlp, _rows(features, indices))
    return _head_trace(head, trace.hidden).output


def embed(mlp: Mlp, features, indices=None) -> np.ndarray:
    """Last hidden-layer activations, the feature space for distances."""
    trace = mlp_forward(mlp, _rows(features, indices))
    if not trace.hidden:
        raise SelectionError("model has no hidden layer to embed with")
    return trace.hidden[-1]


def evaluate(mlp: Mlp, features, labels, indices=None) -> tuple[float, float]:
    """(accuracy, macro recall over classes present in the evaluated labels)."""
    x = _rows(features, indices)
    y = np.asarray(labels, dtype=np.int64)
    if indices is not None:
        y = y[np.asarray(indices, dtype=np.int64)]
    if len(y) == 0:
        raise SpecError("evaluation set is empty")
    pred = np.argmax(mlp_forward(mlp, x).probs, axis=1)
    correct = pred == y
    recalls = [correct[y == c].mean() for c in np.unique(y)]
    return float(correct.mean()), float(np.mean(recalls))


def save_checkpoint(path: str | os.PathLike, mlp: Mlp, head: UncertaintyHead) -> None:
    """Decimal text dump: magic/version, layer sizes, head width, then one value per line."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        fh.write("layers " + " ".join(str(s) for s in mlp.layer_sizes) + "\n")
        fh.write(f"head_width {head.width}\n")
        for arr in mlp.arrays() + head.arrays():
            for v in arr.ravel():
                fh.write(f"{v:.17g}\n")


def load_checkpoint(path: str | os.PathLike) -> tuple[Mlp, UncertaintyHead]:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    try:
        magic, version = lines[0].split()
        if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: not a version {CHECKPOINT_VERSION} checkpoint")
        key, *sizes = lines[1].split()
        key2, width = lines[2].split()
        if key != "layers" or key2 != "head_width":
            raise FormatError(f"{path}: malformed header")
        sizes = [int(s) for s in sizes]
        width = int(width)
        values = np.array([float(v) for v in lines[3:] if v.strip()])
    except (ValueError, IndexError):
        raise FormatError(f"{path}: malformed checkpoint") from None
    mlp, head = init_params(sizes, width, 0)
    arrays = mlp.arrays() + head.arrays()
    if sum(a.size for a in arrays) != len(values):
        raise FormatError(f"{path}: parameter count does not match header")
    pos = 0
    for arr in arrays:
        arr[...] = values[pos:pos + arr.size].reshape(arr.shape)
        pos += arr.size
    return mlp, head
