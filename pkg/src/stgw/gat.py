"""Two-layer multi-head graph attention network trained on edge classification.

The network is small (hundreds of nodes, full-batch training) so everything is
plain numpy: forward passes are dense masked-softmax attention, and gradients
are hand-derived reverse-mode so training stays dependency-free and
bit-reproducible.  The trained second-layer attention matrix is the transition
matrix consumed by the strong-product construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, ValidationError
from .graphs import CaseMatrix, RouteGraph, TransitionMatrix

LEAKY_SLOPE = 0.35
Q_CLAMP = 1e-12

TRAIN, VALIDATION, TEST = 0, 1, 2
_SPLIT_CODE = {"train": TRAIN, "validation": VALIDATION, "test": TEST}


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    """x for x >= 0, slope * x below."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, slope * x, x)
    return out if out.ndim else float(out)


def _leaky_grad(x, slope: float):
    return np.where(x < 0, slope, 1.0)


def elu(x):
    """x for x >= 0, exp(x) - 1 below."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, np.expm1(np.minimum(x, 0.0)), x)
    return out if out.ndim else float(out)


def _elu_grad(x):
    return np.where(x < 0, np.exp(np.minimum(x, 0.0)), 1.0)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(eq=False)
class GatLayerParams:
    """One attention layer: per-head linear maps W (O x F) and score vectors (2O,)."""

    weights: list[np.ndarray]
    attn: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.attn) or not self.weights:
            raise ValidationError("layer needs matching, non-empty weight/attention lists")
        f_in = self.weights[0].shape[1]
        o = self.weights[0].shape[0]
        for W, a in zip(self.weights, self.attn):
            if W.shape != (o, f_in):
                raise ValidationError("all heads must share input and output dimensions")
            if a.shape != (2 * o,):
                raise ValidationError("attention vector length must be twice the head dimension")

    @property
    def head_count(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[0].shape[0]


@dataclass(eq=False)
class GatModel:
    """7-head layer into a single-head layer plus the edge-score vector theta."""

    layer1: GatLayerParams
    layer2: GatLayerParams
    theta: np.ndarray

    def __post_init__(self):
        if self.layer2.head_count != 1:
            raise ValidationError("second layer must be single-head")
        cascade = self.layer1.head_count * self.layer1.out_dim
        if self.layer2.in_dim != cascade:
            raise ValidationError(
                f"layer-2 input dim {self.layer2.in_dim} != cascaded layer-1 output {cascade}"
            )
        if self.theta.shape != (self.layer2.out_dim,):
            raise ValidationError("theta length must equal the layer-2 output dimension")

    @classmethod
    def create(cls, feature_dim: int, heads: int = 7, head_dim: int = 122,
               out_dim: int = 88, seed: int = 0) -> "GatModel":
        """Glorot-uniform initialization of every parameter group."""
        rng = np.random.default_rng(seed)

        def glorot(shape, fan_in, fan_out):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-a, a, size=shape)

        layer1 = GatLayerParams(
            weights=[glorot((head_dim, feature_dim), feature_dim, head_dim)
                     for _ in range(heads)],
            attn=[glorot((2 * head_dim,), 2 * head_dim, 1) for _ in range(heads)],
        )
        cascade = heads * head_dim
        layer2 = GatLayerParams(
            weights=[glorot((out_dim, cascade), cascade, out_dim)],
            attn=[glorot((2 * out_dim,), 2 * out_dim, 1)],
        )
        theta = glorot((out_dim,), out_dim, 1)
        return cls(layer1=layer1, layer2=layer2, theta=theta)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in a fixed order (shared with gradients)."""
        return (list(self.layer1.weights) + list(self.layer1.attn)
                + [self.layer2.weights[0], self.layer2.attn[0], self.theta])

    def copy(self) -> "GatModel":
        return GatModel(
            layer1=GatLayerParams(weights=[W.copy() for W in self.layer1.weights],
                                  attn=[a.copy() for a in self.layer1.attn]),
            layer2=GatLayerParams(weights=[self.layer2.weights[0].copy()],
                                  attn=[self.layer2.attn[0].copy()]),
            theta=self.theta.copy(),
        )


@dataclass(eq=False)
class TrainConfig:
    learning_rate: float = 0.005
    patience: int = 100
    max_epochs: int = 3000
    seed: int = 0
    leaky_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning rate must be positive")
        if self.patience < 1:
            raise ValidationError("patience must be at least 1")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be at least 1")


@dataclass(eq=False)
class SampleSets:
    """Positive/negative pair pool with a 6:2:2 split and a balanced test set."""

    pairs: np.ndarray   # P x 2 node indices, i < j
    labels: np.ndarray  # P, 1.0 for edges, 0.0 for negatives
    split: np.ndarray   # P, codes TRAIN / VALIDATION / TEST

    def subset(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        code = _SPLIT_CODE[name]
        keep = self.split == code
        return self.pairs[keep], self.labels[keep]

    def counts(self, name: str) -> tuple[int, int]:
        pairs, labels = self.subset(name)
        pos = int(labels.sum())
        return pos, len(labels) - pos


def neighborhood_mask(base: RouteGraph) -> np.ndarray:
    """Boolean N x N first-order neighborhoods including self-loops."""
    mask = base.dense_adjacency() > 0
    np.fill_diagonal(mask, True)
    return mask


def _as_mask(neighborhoods, n: int) -> np.ndarray:
    """Accept a RouteGraph, an N x N mask, or per-node neighbor index lists."""
    if isinstance(neighborhoods, RouteGraph):
        return neighborhood_mask(neighborhoods)
    if isinstance(neighborhoods, np.ndarray) and neighborhoods.ndim == 2:
        mask = neighborhoods.astype(bool)
    else:
        mask = np.zeros((n, n), dtype=bool)
        for i, nbr in enumerate(neighborhoods):
            mask[i, list(nbr)] = True
    if mask.shape != (n, n):
        raise ValidationError("neighborhood mask shape does not match the feature count")
    if not np.all(np.diag(mask)):
        raise ValidationError("every neighborhood must include the node itself")
    return mask


def _head_attention(W, a, X, mask, slope):
    """Masked-softmax attention for one head; returns (A, cache for backward)."""
    Z = X @ W.T
    o = W.shape[0]
    s = Z @ a[:o]
    r = Z @ a[o:]
    E = s[:, None] + r[None, :]
    logits = np.where(mask, leaky_relu(E, slope), -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    ex = np.exp(logits)
    A = ex / ex.sum(axis=1, keepdims=True)
    return A, (Z, E, A)


def _head_forward(W, a, X, mask, slope):
    A, (Z, E, _) = _head_attention(W, a, X, mask, slope)
    U = A @ Z
    return elu(U), (Z, E, A, U)


def _head_backward(W, a, X, mask, slope, cache, dH):
    Z, E, A, U = cache
    dU = dH * _elu_grad(U)
    dA = dU @ Z.T
    dZ = A.T @ dU
    dP = A * (dA - (A * dA).sum(axis=1, keepdims=True))
    dE = dP * _leaky_grad(E, slope)
    ds = dE.sum(axis=1)
    dr = dE.sum(axis=0)
    o = W.shape[0]
    da = np.concatenate([Z.T @ ds, Z.T @ dr])
    dZ += np.outer(ds, a[:o]) + np.outer(dr, a[o:])
    dW = dZ.T @ X
    dX = dZ @ W
    return dW, da, dX


def _check_features(layer: GatLayerParams, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != layer.in_dim:
        raise ValidationError(
            f"feature matrix of shape {X.shape} does not match layer input "
            f"dimension {layer.in_dim}"
        )


def attention_coefficients(layer: GatLayerParams, features: np.ndarray,
                           neighborhoods, slope: float = LEAKY_SLOPE) -> list[sp.csr_matrix]:
    """Per-head row-stochastic attention matrices over the given neighborhoods."""
    X = np.asarray(features, dtype=float)
    _check_features(layer, X)
    mask = _as_mask(neighborhoods, X.shape[0])
    out = []
    for W, a in zip(layer.weights, layer.attn):
        A, _ = _head_attention(W, a, X, mask, slope)
        out.append(sp.csr_matrix(np.where(mask, A, 0.0)))
    return out


def layer_forward(layer: GatLayerParams, features: np.ndarray, neighborhoods,
                  concat: bool = True, slope: float = LEAKY_SLOPE) -> np.ndarray:
    """ELU-activated attention aggregation; heads concatenated when requested."""
    X = np.asarray(features, dtype=float)
    _check_features(layer, X)
    mask = _as_mask(neighborhoods, X.shape[0])
    outs = [_head_forward(W, a, X, mask, slope)[0]
            for W, a in zip(layer.weights, layer.attn)]
    if concat:
        return np.concatenate(outs, axis=1)
    if len(outs) != 1:
        raise ValidationError("concat=False is only defined for single-head layers")
    return outs[0]


def _model_forward(model: GatModel, X, mask, slope):
    caches1 = []
    outs1 = []
    for W, a in zip(model.layer1.weights, model.layer1.attn):
        H, cache = _head_forward(W, a, X, mask, slope)
        outs1.append(H)
        caches1.append(cache)
    X1 = np.concatenate(outs1, axis=1)
    X2, cache2 = _head_forward(model.layer2.weights[0], model.layer2.attn[0],
                               X1, mask, slope)
    return X1, X2, (caches1, cache2)


def edge_probability(xi: np.ndarray, xj: np.ndarray, theta: np.ndarray):
    """Sigmoid of the theta-weighted Hadamard product; symmetric in (i, j)."""
    return sigmoid((np.asarray(xi) * np.asarray(xj)) @ np.asarray(theta))


def bce_loss(q, labels) -> float:
    """Mean binary cross-entropy with outputs clamped to [1e-12, 1 - 1e-12]."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    if q.size == 0:
        raise ValidationError("cannot evaluate loss on an empty sample subset")
    qc = np.clip(q, Q_CLAMP, 1.0 - Q_CLAMP)
    return float(-np.mean(labels * np.log(qc) + (1.0 - labels) * np.log(1.0 - qc)))


def _pair_outputs(X2, theta, pairs):
    xi = X2[pairs[:, 0]]
    xj = X2[pairs[:, 1]]
    prod = xi * xj
    return xi, xj, prod, sigmoid(prod @ theta)


def _loss_and_grads(model: GatModel, X, mask, pairs, labels, slope):
    """Full forward pass plus hand-derived reverse-mode gradients.

    Returns (loss, grads, q) with grads ordered exactly like model.parameters().
    """
    X1, X2, (caches1, cache2) = _model_forward(model, X, mask, slope)
    xi, xj, prod, q_raw = _pair_outputs(X2, model.theta, pairs)
    loss = bce_loss(q_raw, labels)

    batch = len(pairs)
    # logit-form BCE gradient: exact wherever the loss clamp is inactive, and
    # still provides an escape direction when sigmoid saturates past the clamp
    draw = (q_raw - labels) / batch

    dtheta = prod.T @ draw
    dprod = np.outer(draw, model.theta)
    dX2 = np.zeros_like(X2)
    np.add.at(dX2, pairs[:, 0], dprod * xj)
    np.add.at(dX2, pairs[:, 1], dprod * xi)

    dW2, da2, dX1 = _head_backward(model.layer2.weights[0], model.layer2.attn[0],
                                   X1, mask, slope, cache2, dX2)

    o1 = model.layer1.out_dim
    dW1s, da1s = [], []
    for k, (W, a) in enumerate(zip(model.layer1.weights, model.layer1.attn)):
        dH = dX1[:, k * o1:(k + 1) * o1]
        dW, da, _ = _head_backward(W, a, X, mask, slope, caches1[k], dH)
        dW1s.append(dW)
        da1s.append(da)

    grads = dW1s + da1s + [dW2, da2, dtheta]
    return loss, grads, q_raw


def _evaluate_loss(model: GatModel, X, mask, pairs, labels, slope) -> float:
    _, X2, _ = _model_forward(model, X, mask, slope)
    _, _, _, q = _pair_outputs(X2, model.theta, pairs)
    return bce_loss(q, labels)


def negative_candidates(base: RouteGraph) -> list[tuple[int, int]]:
    """Non-adjacent pairs reachable in 2 or 3 hops, via boolean adjacency powers."""
    A = base.dense_adjacency() > 0
    A1 = A.astype(np.int64)
    A2 = (A1 @ A1) > 0
    A3 = (A2.astype(np.int64) @ A1) > 0
    reach = (A2 | A3) & ~A
    np.fill_diagonal(reach, False)
    idx_i, idx_j = np.nonzero(np.triu(reach, k=1))
    return list(zip(idx_i.tolist(), idx_j.tolist()))


def make_samples(base: RouteGraph, seed: int) -> SampleSets:
    """Draw negatives, then split 6:2:2 per class with an exactly balanced test set."""
    positives = list(base.edges)
    if not positives:
        raise ValidationError("cannot sample edges from a graph with no edges")
    candidates = negative_candidates(base)
    rng = np.random.default_rng(seed)

    if len(candidates) < len(positives):
        warnings.warn(
            f"only {len(candidates)} negative candidates for {len(positives)} edges; "
            "using all of them"
        )
        negatives = list(candidates)
    else:
        chosen = rng.choice(len(candidates), size=len(positives), replace=False)
        negatives = [candidates[k] for k in chosen]

    n_pos, n_neg = len(positives), len(negatives)
    n_test = min(round(0.2 * n_pos), n_neg)
    n_val_pos = round(0.2 * n_pos)
    n_val_neg = min(round(0.2 * n_neg), n_neg - n_test)

    split_pos = np.full(n_pos, TRAIN, dtype=np.int8)
    perm = rng.permutation(n_pos)
    split_pos[perm[:n_test]] = TEST
    split_pos[perm[n_test:n_test + n_val_pos]] = VALIDATION

    split_neg = np.full(n_neg, TRAIN, dtype=np.int8)
    perm = rng.permutation(n_neg)
    split_neg[perm[:n_test]] = TEST
    split_neg[perm[n_test:n_test + n_val_neg]] = VALIDATION

    pairs = np.array(positives + negatives, dtype=int)
    labels = np.concatenate([np.ones(n_pos), np.zeros(n_neg)])
    split = np.concatenate([split_pos, split_neg])
    return SampleSets(pairs=pairs, labels=labels, split=split)


class _Adam:
    """Adaptive moment estimation with the standard decay constants."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def train(model: GatModel, base: RouteGraph, features, samples: SampleSets,
          cfg: TrainConfig) -> tuple[GatModel, dict]:
    """Full-batch training with early stopping on the validation loss.

    Returns the parameters of the best validation epoch and the loss history.
    """
    X = features.values if isinstance(features, CaseMatrix) else np.asarray(features, float)
    if X.shape[1] != model.layer1.in_dim:
        raise ValidationError(
            f"feature dimension {X.shape[1]} != layer-1 input {model.layer1.in_dim}"
        )
    mask = neighborhood_mask(base)
    train_pairs, train_labels = samples.subset("train")
    val_pairs, val_labels = samples.subset("validation")

    work = model.copy()
    params = work.parameters()
    opt = _Adam(params, lr=cfg.learning_rate)

    best_val = np.inf
    best_params = [p.copy() for p in params]
    best_epoch = 0
    wait = 0
    history = {"train_loss": [], "val_loss": [], "best_epoch": 0}

    for epoch in range(cfg.max_epochs):
        loss, grads, _ = _loss_and_grads(work, X, mask, train_pairs, train_labels,
                                         cfg.leaky_slope)
        # tiny graphs can yield an empty validation split; fall back to the
        # training loss so early stopping still has a monitor
        if len(val_pairs):
            val_loss = _evaluate_loss(work, X, mask, val_pairs, val_labels,
                                      cfg.leaky_slope)
        else:
            val_loss = loss
        if not (np.isfinite(loss) and np.isfinite(val_loss)):
            raise NumericError(f"training diverged (non-finite loss) at epoch {epoch}")
        history["train_loss"].append(loss)
        history["val_loss"].append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in params]
            best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
        opt.step(params, grads)

    for p, b in zip(params, best_params):
        p[...] = b
    history["best_epoch"] = best_epoch
    return work, history


def predict_edges(model: GatModel, base: RouteGraph, features, pairs: np.ndarray,
                  slope: float = LEAKY_SLOPE) -> np.ndarray:
    """Edge probabilities q for the given node-index pairs."""
    X = features.values if isinstance(features, CaseMatrix) else np.asarray(features, float)
    mask = neighborhood_mask(base)
    _, X2, _ = _model_forward(model, X, mask, slope)
    _, _, _, q = _pair_outputs(X2, model.theta, np.asarray(pairs, dtype=int))
    return q


def edge_accuracy(model: GatModel, base: RouteGraph, features, samples: SampleSets,
                  subset: str = "test", threshold: float = 0.5) -> float:
    """Classification accuracy of q > threshold against the edge labels."""
    pairs, labels = samples.subset(subset)
    q = predict_edges(model, base, features, pairs)
    return float(np.mean((q > threshold) == (labels > 0.5)))


def extract_transition(model: GatModel, base: RouteGraph, features,
                       slope: float = LEAKY_SLOPE) -> TransitionMatrix:
    """Transition matrix: second-layer attention evaluated on layer-1 outputs."""
    X = features.values if isinstance(features, CaseMatrix) else np.asarray(features, float)
    mask = neighborhood_mask(base)
    X1 = layer_forward(model.layer1, X, mask, concat=True, slope=slope)
    A, _ = _head_attention(model.layer2.weights[0], model.layer2.attn[0], X1, mask, slope)
    return TransitionMatrix(P=np.where(mask, A, 0.0))


def influential_scores(transition: TransitionMatrix, max_hop: int = 5) -> np.ndarray:
    """Summed off-diagonal column mass of P^m for m = 1..max_hop, per node."""
    P = transition.P
    scores = np.zeros(P.shape[0])
    power = np.eye(P.shape[0])
    for _ in range(max_hop):
        power = power @ P
        scores += power.sum(axis=0) - np.diag(power)
    return scores
