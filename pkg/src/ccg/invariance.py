"""Augmented-environment views and the dual invariance losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PlantedWorld
from .reward import clamp_probs


@dataclass
class EnvViews:
    views: list[np.ndarray]  # view 0 is the unmodified input

    @property
    def M(self) -> int:
        return len(self.views)


def _perturb(x: np.ndarray, planted: PlantedWorld | None,
             rng: np.random.Generator) -> np.ndarray:
    out = x.copy()
    if planted is not None:
        # rescale the whole spurious block by one scalar drawn U(-1, 1) —
        # the same family as the generator's environment shifts, which move
        # the spurious-feature mean toward (or past) zero
        sp = planted.spurious_indices()
        if len(sp):
            out[sp] = out[sp] * rng.uniform(-1.0, 1.0)
        return out
    active = np.flatnonzero(x != 0.0)
    k = math.ceil(0.1 * len(active)) if len(active) else 0
    zero_idx = rng.choice(active, size=k, replace=False) if k else np.array([], dtype=int)
    out += rng.normal(0.0, 0.05, size=len(out))
    out[zero_idx] = 0.0
    return out


def make_env_views(x: np.ndarray, M: int, planted: PlantedWorld | None = None,
                   seed=0) -> EnvViews:
    """View 1 is x itself. With a planted world, later views rescale the
    spurious-block features by a random U(-1, 1) factor; without one, they
    zero a random 10% of active features and jitter the rest."""
    if M < 1:
        raise ValueError("M must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    views = [x.copy()]
    for _ in range(M - 1):
        views.append(_perturb(x, planted, rng))
    return EnvViews(views=views)


def make_env_views_batch(X: np.ndarray, M: int, planted: PlantedWorld | None,
                         rng: np.random.Generator) -> list[np.ndarray]:
    """Batch counterpart used by the training loop; one rng stream, fixed
    view order for determinism."""
    X = np.asarray(X, dtype=np.float64)
    views = [X]
    for _ in range(M - 1):
        if planted is not None:
            V = X.copy()
            sp = planted.spurious_indices()
            if len(sp):
                V[:, sp] = V[:, sp] * rng.uniform(-1.0, 1.0, size=(len(X), 1))
        else:
            V = np.stack([_perturb(X[i], None, rng) for i in range(len(X))])
        views.append(V)
    return views


def contrastive_inv_loss(encodings: list[np.ndarray]) -> float:
    """Sum over players and unordered view pairs of squared L2 distance
    between encodings; mean over the batch when encodings are (M, B, e)."""
    total = 0.0
    for enc in encodings:
        enc = np.asarray(enc, dtype=np.float64)
        M = enc.shape[0]
        for m in range(M):
            for n in range(m + 1, M):
                diff = enc[m] - enc[n]
                sq = (diff ** 2).sum(axis=-1)
                total += float(sq.mean()) if sq.ndim else float(sq)
    return total


def env_consistency_loss(preds: list[list[np.ndarray]],
                         y_players: list[np.ndarray]) -> float:
    """(1/M) sum over environments of the per-player binary cross-entropy
    against the true labels, summed over players and labels, mean over batch.

    preds[m][k] holds player k's probabilities for its own labels under
    environment m; y_players[k] the matching ground truth.
    """
    M = len(preds)
    if M < 1:
        raise ValueError("need at least one environment")
    total = 0.0
    for m in range(M):
        for k, pk in enumerate(preds[m]):
            p = clamp_probs(np.atleast_2d(np.asarray(pk, dtype=np.float64)))
            y = np.atleast_2d(np.asarray(y_players[k], dtype=np.float64))
            bce = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
            total += float(bce.sum(axis=1).mean())
    return total / M
