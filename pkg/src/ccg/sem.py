"""Neural-SEM label predictor with exact analytic gradients.

Each ordered label pair (i, j) owns a tiny 2-layer relu MLP h_ij(x); the
probability of label i is sigmoid(sum_j W[i,j] * h_ij(x) + b[i]). The pair
MLPs are stored as stacked arrays so a whole batch runs through einsum, and
backprop is hand-derived for this fixed architecture (no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError


@dataclass
class PairwiseMlp:
    """View of a single pair's MLP: forward(x) = w2 . relu(w1 x + b1) + b2."""
    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def forward(self, x: np.ndarray) -> float:
        return float(self.w2 @ np.maximum(self.w1 @ x + self.b1, 0.0) + self.b2)


@dataclass
class SemModel:
    d: int
    L: int
    hidden: int
    w1: np.ndarray  # (L, L, hidden, d)
    b1: np.ndarray  # (L, L, hidden)
    w2: np.ndarray  # (L, L, hidden)
    b2: np.ndarray  # (L, L)
    W: np.ndarray   # (L, L) causal weights, diagonal kept at exactly 0
    b: np.ndarray   # (L,)

    def pair_mlp(self, i: int, j: int) -> PairwiseMlp:
        return PairwiseMlp(self.w1[i, j], self.b1[i, j], self.w2[i, j], float(self.b2[i, j]))

    def set_pair_mlp(self, i: int, j: int, mlp: PairwiseMlp) -> None:
        self.w1[i, j] = mlp.w1
        self.b1[i, j] = mlp.b1
        self.w2[i, j] = mlp.w2
        self.b2[i, j] = mlp.b2

    def copy(self) -> "SemModel":
        return SemModel(self.d, self.L, self.hidden,
                        self.w1.copy(), self.b1.copy(), self.w2.copy(),
                        self.b2.copy(), self.W.copy(), self.b.copy())

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2,
                "b2": self.b2, "W": self.W, "b": self.b}


@dataclass
class GradientBundle:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    W: np.ndarray
    b: np.ndarray
    enc_w: list | None = None  # per-player encoder weight grads
    enc_b: list | None = None

    def arrays(self) -> list[np.ndarray]:
        out = [self.w1, self.b1, self.w2, self.b2, self.W, self.b]
        if self.enc_w is not None:
            out += list(self.enc_w) + list(self.enc_b)
        return out


def zero_gradients(model: SemModel, n_encoders: int = 0,
                   enc_dim: int = 0) -> GradientBundle:
    g = GradientBundle(*(np.zeros_like(a) for a in
                         (model.w1, model.b1, model.w2, model.b2, model.W, model.b)))
    if n_encoders:
        g.enc_w = [np.zeros((enc_dim, model.d)) for _ in range(n_encoders)]
        g.enc_b = [np.zeros(enc_dim) for _ in range(n_encoders)]
    return g


def init_model(d: int, L: int, hidden: int, seed: int) -> SemModel:
    """Fan-based uniform init for the pair MLPs, N(0, 0.01) for W, zero biases."""
    if min(d, L, hidden) < 1:
        raise ValueError("d, L, hidden must be positive")
    rng = np.random.default_rng(seed)
    a1 = np.sqrt(6.0 / (d + hidden))
    a2 = np.sqrt(6.0 / (hidden + 1))
    w1 = rng.uniform(-a1, a1, size=(L, L, hidden, d))
    w2 = rng.uniform(-a2, a2, size=(L, L, hidden))
    W = rng.normal(0.0, 0.01, size=(L, L))
    np.fill_diagonal(W, 0.0)
    diag = np.eye(L, dtype=bool)
    w1[diag] = 0.0
    w2[diag] = 0.0
    return SemModel(d=d, L=L, hidden=hidden,
                    w1=w1, b1=np.zeros((L, L, hidden)), w2=w2,
                    b2=np.zeros((L, L)), W=W, b=np.zeros(L))


def param_count(model: SemModel) -> int:
    """Off-diagonal pair MLPs + W + b (diagonal MLP slots are unused)."""
    per_pair = model.hidden * model.d + model.hidden + model.hidden + 1
    return model.L * (model.L - 1) * per_pair + model.L ** 2 + model.L


def full_mask(L: int) -> np.ndarray:
    return 1.0 - np.eye(L)


def pair_features(model: SemModel, X: np.ndarray):
    """All h_ij(x) for a batch. Returns H of shape (B, L, L) plus a cache
    of intermediates for the backward pass."""
    if X.ndim != 2 or X.shape[1] != model.d:
        raise DimensionError(f"expected features of dimension {model.d}")
    z = np.einsum("ijhd,bd->bijh", model.w1, X) + model.b1
    a = np.maximum(z, 0.0)
    H = np.einsum("ijh,bijh->bij", model.w2, a) + model.b2
    return H, (X, z, a)


def head(model: SemModel, H: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Probabilities sigmoid((W * mask) H + b); mask is (L, L) binary."""
    Wm = model.W * mask
    logits = np.einsum("ij,bij->bi", Wm, H) + model.b
    return expit(logits)


def head_backward(model: SemModel, H: np.ndarray, mask: np.ndarray,
                  probs: np.ndarray, dprobs: np.ndarray,
                  grads: GradientBundle, dH: np.ndarray) -> None:
    """Accumulate grads for one masked head; dH collects dLoss/dH."""
    dlogits = dprobs * probs * (1.0 - probs)
    grads.b += dlogits.sum(axis=0)
    gW = np.einsum("bi,bij->ij", dlogits, H) * mask
    np.fill_diagonal(gW, 0.0)
    grads.W += gW
    dH += dlogits[:, :, None] * (model.W * mask)[None, :, :]


def pair_backward(model: SemModel, cache, dH: np.ndarray,
                  grads: GradientBundle, need_dx: bool = False):
    """Backprop accumulated dH through the stacked pair MLPs."""
    X, z, a = cache
    grads.b2 += dH.sum(axis=0)
    grads.w2 += np.einsum("bij,bijh->ijh", dH, a)
    dz = dH[:, :, :, None] * model.w2[None] * (z > 0.0)
    grads.w1 += np.einsum("bijh,bd->ijhd", dz, X)
    grads.b1 += dz.sum(axis=0)
    if need_dx:
        return np.einsum("bijh,ijhd->bd", dz, model.w1)
    return None


def predict(model: SemModel, x: np.ndarray) -> np.ndarray:
    """Probability vector for one sample using all off-diagonal interactions."""
    return predict_masked(model, x, full_mask(model.L))


def predict_masked(model: SemModel, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    H, _ = pair_features(model, x[None, :])
    return head(model, H, np.asarray(mask, dtype=np.float64))[0]


def predict_batch(model: SemModel, X: np.ndarray,
                  mask: np.ndarray | None = None) -> np.ndarray:
    if mask is None:
        mask = full_mask(model.L)
    H, _ = pair_features(model, np.asarray(X, dtype=np.float64))
    return head(model, H, mask)


def project_diagonal(model: SemModel) -> None:
    np.fill_diagonal(model.W, 0.0)


def loss_and_gradients(model: SemModel, batch, objective):
    """Composite objective value and analytic gradients; see training module
    for the ObjectiveSpec contract."""
    from . import training
    X, Y = batch
    total, grads, _ = training.composite_value_and_grads(model, np.asarray(X), np.asarray(Y), objective)
    return total, grads
