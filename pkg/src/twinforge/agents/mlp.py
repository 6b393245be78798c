"""Fully connected Q-network on a single flat parameter vector.

Layer ``i`` owns a weight block of shape ``(sizes[i], sizes[i+1])`` followed
by its bias. Hidden layers use ReLU, the output layer is linear. All hidden
parameters are therefore one contiguous prefix of the flat vector, and the
output layer is the suffix, which lets the optimizer touch only the output
columns of actions present in a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import NumericError, ShapeError


def param_count(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


class MlpParams:
    def __init__(self, sizes, flat: np.ndarray | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ShapeError(f"bad layer sizes {self.sizes}")
        n = param_count(self.sizes)
        if flat is None:
            flat = np.zeros(n)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (n,):
            raise ShapeError(f"expected {n} parameters, got {flat.shape}")
        self.flat = flat
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(flat[off : off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(flat[off : off + b])
            off += b
        a, b = self.sizes[-2], self.sizes[-1]
        self.output_offset = n - a * b - b

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def action_count(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(self.sizes, self.flat.copy())

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return self.sizes == other.sizes and np.array_equal(self.flat, other.flat)

    def __repr__(self):
        return f"MlpParams(sizes={self.sizes})"


def init_mlp(sizes, rng: np.random.Generator) -> MlpParams:
    """He-normal weights, zero biases."""
    p = MlpParams(sizes)
    for W in p.weights:
        W[...] = rng.normal(0.0, math.sqrt(2.0 / W.shape[0]), size=W.shape)
    return p


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ShapeError(f"input of shape {np.shape(x)} does not match input_dim {params.input_dim}")
    return X, single


def _hidden(params: MlpParams, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    h = X
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        h = h @ W
        h += b
        np.maximum(h, 0.0, out=h)
        acts.append(h)
    return acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Action values for one state (1-D input) or a batch (2-D input)."""
    X, single = _as_batch(params, x)
    out = _hidden(params, X)[-1] @ params.weights[-1] + params.biases[-1]
    return out[0] if single else out


@dataclass
class TdGrad:
    """Gradient of the mean-squared TD loss on the taken actions only.

    ``hidden`` is dense over the hidden-parameter prefix; the output layer is
    kept compact as columns ``cols`` of the weight matrix and bias.
    """

    loss: float
    hidden: np.ndarray
    cols: np.ndarray
    out_w: np.ndarray  # (h_last, len(cols))
    out_b: np.ndarray  # (len(cols),)


@numba.njit(cache=True)
def _output_layer(H, Wo, bo, actions, targets):
    """Loss, hidden-layer error signal and compact output gradients."""
    B, h = H.shape
    A = Wo.shape[1]
    slot = np.full(A, -1)
    for i in range(B):
        slot[actions[i]] = 0
    cols = np.nonzero(slot == 0)[0]
    for j in range(cols.shape[0]):
        slot[cols[j]] = j
    out_w = np.zeros((h, cols.shape[0]))
    out_b = np.zeros(cols.shape[0])
    delta = np.empty((B, h))
    loss = 0.0
    for i in range(B):
        a = actions[i]
        q = bo[a]
        for k in range(h):
            q += H[i, k] * Wo[k, a]
        err = q - targets[i]
        loss += err * err
        d = 2.0 * err / B
        j = slot[a]
        out_b[j] += d
        for k in range(h):
            out_w[k, j] += H[i, k] * d
            delta[i, k] = d * Wo[k, a]
    return loss / B, delta, cols, out_w, out_b


def td_grad(params: MlpParams, X: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> TdGrad:
    acts = _hidden(params, X)
    loss, delta, cols, out_w, out_b = _output_layer(
        acts[-1], params.weights[-1], params.biases[-1],
        np.ascontiguousarray(actions, dtype=np.int64), np.ascontiguousarray(targets, dtype=np.float64),
    )
    pieces: list[np.ndarray] = []
    for i in range(len(acts) - 1, 0, -1):
        delta *= acts[i] > 0
        pieces.append(delta.sum(axis=0))
        pieces.append((acts[i - 1].T @ delta).ravel())
        if i > 1:
            delta = delta @ params.weights[i - 1].T
    hidden = np.concatenate(pieces[::-1]) if pieces else np.zeros(0)
    return TdGrad(float(loss), hidden, cols, out_w, out_b)


def dense_gradient(params: MlpParams, g: TdGrad) -> np.ndarray:
    """Scatter a compact ``TdGrad`` into a full flat gradient vector."""
    full = np.zeros_like(params.flat)
    full[: params.output_offset] = g.hidden
    a, b = params.sizes[-2], params.sizes[-1]
    W = full[params.output_offset : params.output_offset + a * b].reshape(a, b)
    W[:, g.cols] = g.out_w
    full[params.output_offset + a * b :][g.cols] = g.out_b
    return full


def td_loss(params: MlpParams, X, actions, targets) -> float:
    q = mlp_forward(params, X)[np.arange(len(actions)), actions]
    err = q - targets
    return float(err @ err) / len(actions)


@numba.njit(cache=True, fastmath=True)
def _adam_dense(p, g, m, v, lr, b1, b2, eps, c1, c2):
    for i in range(p.shape[0]):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / c1) / (math.sqrt(vi / c2) + eps)


@numba.njit(cache=True, fastmath=True)
def _adam_columns(W, gW, mW, vW, bias, gb, mb, vb, cols, lr, b1, b2, eps, c1, c2):
    for j in range(cols.shape[0]):
        c = cols[j]
        for h in range(W.shape[0]):
            gi = gW[h, j]
            mi = b1 * mW[h, c] + (1.0 - b1) * gi
            vi = b2 * vW[h, c] + (1.0 - b2) * gi * gi
            mW[h, c] = mi
            vW[h, c] = vi
            W[h, c] -= lr * (mi / c1) / (math.sqrt(vi / c2) + eps)
        gi = gb[j]
        mi = b1 * mb[c] + (1.0 - b1) * gi
        vi = b2 * vb[c] + (1.0 - b2) * gi * gi
        mb[c] = mi
        vb[c] = vi
        bias[c] -= lr * (mi / c1) / (math.sqrt(vi / c2) + eps)


class Adam:
    """Adam with lazy output-layer moments.

    Hidden parameters get a standard dense update every step. Output-layer
    columns are updated only when their action appears in the batch (the
    gradient of every other column is exactly zero).
    """

    def __init__(self, params: MlpParams, lr: float = 1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = MlpParams(params.sizes)
        self.v = MlpParams(params.sizes)
        self.t = 0
        self.last_cols = np.zeros(0, dtype=np.int64)  # output columns touched by the last step

    def step(self, params: MlpParams, g: TdGrad) -> None:
        self.t += 1
        self.last_cols = g.cols
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        k = params.output_offset
        if k:
            _adam_dense(
                params.flat[:k], g.hidden, self.m.flat[:k], self.v.flat[:k],
                self.lr, self.beta1, self.beta2, self.eps, c1, c2,
            )
        _adam_columns(
            params.weights[-1], g.out_w, self.m.weights[-1], self.v.weights[-1],
            params.biases[-1], g.out_b, self.m.biases[-1], self.v.biases[-1],
            g.cols, self.lr, self.beta1, self.beta2, self.eps, c1, c2,
        )


def bootstrap_targets(target_params: MlpParams, rewards, next_X, terminals, gamma: float) -> np.ndarray:
    nxt = mlp_forward(target_params, next_X).max(axis=1)
    return rewards + gamma * nxt * (1.0 - terminals)


def mlp_train_step(
    params: MlpParams,
    batch,
    lr: float,
    target_params: MlpParams,
    gamma: float = 0.95,
    optimizer: Adam | None = None,
) -> float:
    """One gradient step on a list of ``(Transition, target or None)`` pairs.

    Missing targets are bootstrapped from ``target_params``. Pass a persistent
    ``optimizer`` to keep Adam moments across calls. Returns the loss before
    the update.
    """
    if not batch:
        raise ValueError("empty batch")
    X = np.array([t.state.values for t, _ in batch], dtype=np.float64)
    actions = np.array([t.action for t, _ in batch], dtype=np.int64)
    missing = np.array([y is None for _, y in batch])
    targets = np.array([0.0 if y is None else y for _, y in batch], dtype=np.float64)
    if missing.any():
        rows = [t for (t, _), m in zip(batch, missing) if m]
        targets[missing] = bootstrap_targets(
            target_params,
            np.array([t.reward for t in rows]),
            np.array([t.next_state.values for t in rows], dtype=np.float64),
            np.array([t.terminal for t in rows], dtype=np.float64),
            gamma,
        )
    if optimizer is None:
        optimizer = Adam(params, lr)
    return train_arrays(params, optimizer, X, actions, targets)


def train_arrays(params: MlpParams, optimizer: Adam, X, actions, targets) -> float:
    if not np.all(np.isfinite(targets)):
        raise NumericError("non-finite TD target in batch")
    g = td_grad(params, X, actions, targets)
    if not math.isfinite(g.loss):
        raise NumericError(f"non-finite loss {g.loss!r}")
    optimizer.step(params, g)
    return g.loss
