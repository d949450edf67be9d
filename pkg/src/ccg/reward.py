"""Counterfactual curiosity reward: JS consistency, prediction diversity,
rare-label accuracy, and the beta/gamma_R annealing schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabelStats

PROB_EPS = 1e-6


@dataclass
class RewardConfig:
    beta0: float = 1.0        # diversity coefficient, annealed down
    betaT: float = 0.2
    gammaR0: float = 0.2      # counterfactual coefficient, annealed up
    gammaRT: float = 1.0
    perturb_frac: float = 0.12
    total_steps: int = 1


@dataclass
class RewardBreakdown:
    rare_acc: float
    diversity: float          # >= 0
    cf_consistency: float     # in [-ln 2, 0]
    total: float


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def kl_bernoulli(p, q):
    """Elementwise KL(Bern(p) || Bern(q)) with probability clamping."""
    p = clamp_probs(np.asarray(p, dtype=np.float64))
    q = clamp_probs(np.asarray(q, dtype=np.float64))
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def js_bernoulli(p, q):
    """Elementwise JS divergence between Bernoulli(p) and Bernoulli(q)."""
    p = clamp_probs(np.asarray(p, dtype=np.float64))
    q = clamp_probs(np.asarray(q, dtype=np.float64))
    m = 0.5 * (p + q)
    return 0.5 * kl_bernoulli(p, m) + 0.5 * kl_bernoulli(q, m)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """JS(p || q) with natural log for general distributions; in [0, ln 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distribution shape mismatch")
    for v in (p, q):
        if (v < 0).any() or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("invalid distribution")

    def kl(a, m):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / m[nz])))

    m = 0.5 * (p + q)
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def cf_consistency(pi_orig: np.ndarray, pi_cf: np.ndarray) -> float:
    """Negative JS between original and counterfactual Bernoulli predictions,
    averaged over the player's labels; in [-ln 2, 0]."""
    js = js_bernoulli(pi_orig, pi_cf)
    return float(-js.mean())


def generate_counterfactual(x: np.ndarray, salience: np.ndarray, frac: float,
                            seed, batch: np.ndarray | None = None) -> np.ndarray:
    """Perturb ceil(frac * nnz) nonzero features, preferring lowest
    |salience| (ties by index). Half are zeroed; the rest are resampled from
    the batch's empirical marginal for that feature (standard normal when no
    batch is supplied). The rounding extra goes to masking."""
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must be in (0, 1]")
    x = np.asarray(x, dtype=np.float64)
    nz = np.flatnonzero(x != 0.0)
    if len(nz) == 0:
        return x.copy()
    rng = np.random.default_rng(seed)
    sal = np.abs(np.asarray(salience, dtype=np.float64))[nz]
    order = nz[np.lexsort((nz, sal))]
    count = math.ceil(frac * len(nz))
    chosen = order[:count]
    n_mask = math.ceil(count / 2)
    out = x.copy()
    out[chosen[:n_mask]] = 0.0
    for f in chosen[n_mask:]:
        if batch is not None and len(batch) > 0:
            out[f] = batch[rng.integers(0, len(batch)), f]
        else:
            out[f] = rng.standard_normal()
    return out


def player_reward(k: int, preds_all_players: list[np.ndarray], y_true: np.ndarray,
                  subsets: list[list[int]], pi_cf_k: np.ndarray,
                  stats: LabelStats, coeffs: tuple[float, float]) -> RewardBreakdown:
    """Curiosity reward for player k on one sample.

    preds_all_players holds each player's full L-length probability vector;
    pi_cf_k is player k's probabilities on the counterfactual sample.
    """
    beta, gamma_r = coeffs
    sub = np.array(subsets[k], dtype=int)
    pk = preds_all_players[k][sub]
    yk = np.asarray(y_true, dtype=np.float64)[sub]
    freq = np.asarray(stats.freq, dtype=np.float64)[sub]
    correct = ((pk >= 0.5).astype(np.float64) == yk).astype(np.float64)
    rare_acc = float((correct / (1.0 + freq)).mean())

    N = len(preds_all_players)
    if N >= 2:
        others = np.mean([preds_all_players[j][sub]
                          for j in range(N) if j != k], axis=0)
        diversity = float(kl_bernoulli(pk, others).mean())
    else:
        diversity = 0.0

    cfc = cf_consistency(pk, pi_cf_k[sub])
    total = rare_acc + beta * diversity + gamma_r * cfc
    return RewardBreakdown(rare_acc=rare_acc, diversity=diversity,
                           cf_consistency=cfc, total=total)


def anneal(step: int, total_steps: int, cfg: RewardConfig) -> tuple[float, float]:
    """Linear schedules: beta 1.0 -> 0.2 and gamma_R 0.2 -> 1.0 by default."""
    if not 0 <= step <= total_steps:
        raise ValueError("step out of range")
    t = step / total_steps if total_steps > 0 else 1.0
    beta = cfg.beta0 + t * (cfg.betaT - cfg.beta0)
    gamma_r = cfg.gammaR0 + t * (cfg.gammaRT - cfg.gammaR0)
    return beta, gamma_r
