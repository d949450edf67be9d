"""Composite objective, optimizer, and the end-to-end training loop.

The objective is assembled from: imbalance-weighted cross-entropy, a
rare-column BCE regularizer, the graph-learning loss on W, the contrastive
encoder invariance loss, the cross-environment prediction consistency loss,
and the differentiable curiosity surrogate (-beta * diversity +
gamma_R * JS_cf). Gradients are exact reverse-mode for every term.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import evaluation
from .data import Dataset, LabelStats, PlantedWorld, compute_label_stats
from .errors import NumericalError
from .graph import (CausalGraph, GraphLossConfig, extract_graph, graph_loss,
                    ideal_weights, save_graph, load_graph)
from .data import co_occurrence
from .invariance import make_env_views_batch
from .players import (MaskSet, Partition, PlayerEncoder, build_masks,
                      encode_batch, init_encoders, partition_labels)
from .reward import (PROB_EPS, RewardConfig, anneal, clamp_probs,
                     generate_counterfactual, js_bernoulli, kl_bernoulli)
from .sem import (GradientBundle, SemModel, full_mask, head, head_backward,
                  init_model, pair_backward, pair_features, project_diagonal,
                  zero_gradients)


@dataclass
class TrainConfig:
    # training from scratch at this scale needs larger steps than a
    # pretrained-encoder setup would use
    lr_main: float = 1e-3
    lr_aux: float = 1e-2
    weight_decay: float = 1e-2
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 5
    grad_clip: float = 1.0
    n_players: int = 5
    k_topk: int = 3
    warmup_epochs: int = 5
    lambda_graph: float = 1.0
    lambda_inv: float = 1.0
    lambda_env: float = 1.0
    lambda_rwd: float = 1.0
    lambda_rare: float = 0.5
    seed: int = 0
    m_envs: int = 3
    gamma: float = 0.5
    eta: float = 1.5
    lambda_selfloop: float = 0.1
    beta0: float = 1.0
    beta_t: float = 0.2
    gamma_r0: float = 0.2
    gamma_r_t: float = 1.0
    perturb_frac: float = 0.12
    rare_pct: float = 30.0
    hidden: int = 16
    enc_dim: int = 16
    val_frac: float = 0.2
    partition_source: str = "learned"  # "learned" | "cooccur" (w/o CGM)
    uniform_alpha: bool = False        # w/o RLE sets alpha(l) = 1

    def graph_cfg(self, rare_set) -> GraphLossConfig:
        return GraphLossConfig(gamma=self.gamma, eta=self.eta,
                               lambda_selfloop=self.lambda_selfloop,
                               rare_set=frozenset(rare_set))

    def reward_cfg(self, total_steps: int) -> RewardConfig:
        return RewardConfig(beta0=self.beta0, betaT=self.beta_t,
                            gammaR0=self.gamma_r0, gammaRT=self.gamma_r_t,
                            perturb_frac=self.perturb_frac,
                            total_steps=total_steps)


@dataclass
class AlphaWeights:
    alpha: np.ndarray  # (L,) positive, mean 1


def alpha_weights(stats: LabelStats) -> AlphaWeights:
    """alpha(l) proportional to freq(l)**-0.25 (freq floored at 1),
    normalized to mean 1."""
    freq = np.maximum(np.asarray(stats.freq, dtype=np.float64), 1.0)
    raw = freq ** -0.25
    return AlphaWeights(alpha=raw * len(raw) / raw.sum())


def _bce_terms(probs: np.ndarray, Y: np.ndarray):
    p = clamp_probs(probs)
    y = np.asarray(Y, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    in_range = (probs > PROB_EPS) & (probs < 1.0 - PROB_EPS)
    dprobs = -(y / p - (1.0 - y) / (1.0 - p)) * in_range
    return loss, dprobs


def weighted_ce(preds: np.ndarray, y: np.ndarray, alpha) -> float:
    """Imbalance-weighted BCE: mean over the batch, alpha-weighted sum over
    labels, with both class terms included."""
    a = alpha.alpha if isinstance(alpha, AlphaWeights) else np.asarray(alpha)
    loss, _ = _bce_terms(np.atleast_2d(preds), np.atleast_2d(y))
    return float((loss * a[None, :]).sum(axis=1).mean())


def rare_reg_loss(preds: np.ndarray, y: np.ndarray, stats: LabelStats) -> float:
    """BCE restricted to rare-label columns; 0 when the rare set is empty."""
    cols = sorted(stats.rare_set)
    if not cols:
        return 0.0
    preds = np.atleast_2d(preds)
    y = np.atleast_2d(y)
    loss, _ = _bce_terms(preds[:, cols], y[:, cols])
    return float(loss.sum(axis=1).mean())


@dataclass
class ObjectiveSpec:
    """Names the active loss terms, their coefficients, and the context
    (masks, targets, schedules) needed to evaluate them."""
    alpha: np.ndarray
    stats: LabelStats
    graph_cfg: GraphLossConfig
    wtilde: np.ndarray | None = None
    subsets: list | None = None
    masks: list | None = None
    encoders: list | None = None
    lambda_ce: float = 1.0
    lambda_rare: float = 0.0
    lambda_graph: float = 0.0
    lambda_inv: float = 0.0
    lambda_env: float = 0.0
    lambda_rwd: float = 0.0
    beta: float = 1.0
    gamma_r: float = 0.2
    m_envs: int = 1
    planted: PlantedWorld | None = None
    perturb_frac: float = 0.12
    rng_seed: tuple = (0,)
    # optional precomputed counterfactual batch; when set, the salience-based
    # selection is skipped and these inputs are used directly. The surrogate
    # treats counterfactual inputs as constants either way (the feature
    # selection is a non-differentiable argsort), so finite-difference checks
    # should freeze them here.
    frozen_xcf: np.ndarray | None = None


def _check_finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise NumericalError(name)
    return value


def counterfactual_batch(model: SemModel, X: np.ndarray,
                         obj: ObjectiveSpec) -> np.ndarray:
    """Salience-ranked counterfactual inputs for one batch, exactly as the
    curiosity surrogate builds them. Useful for freezing the counterfactuals
    (ObjectiveSpec.frozen_xcf) in gradient checks."""
    X = np.asarray(X, dtype=np.float64)
    L = model.L
    union = (np.sum(obj.masks, axis=0) if obj.masks is not None
             else full_mask(L))
    H, cache = pair_features(model, X)
    P = head(model, H, union)
    tmp = zero_gradients(model)
    dH = np.zeros_like(H)
    head_backward(model, H, union, P, np.full_like(P, 1.0 / L), tmp, dH)
    dX = pair_backward(model, cache, dH, tmp, need_dx=True)
    rng_cf = np.random.default_rng(list(obj.rng_seed) + [2])
    return np.stack([generate_counterfactual(X[i], dX[i], obj.perturb_frac,
                                             rng_cf, batch=X)
                     for i in range(len(X))])


def composite_value_and_grads(model: SemModel, X: np.ndarray, Y: np.ndarray,
                              obj: ObjectiveSpec):
    """Evaluate the composite objective on one batch and return
    (total, GradientBundle, per-term breakdown). Pure given obj.rng_seed."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    B, L = len(X), model.L
    have_players = obj.masks is not None and obj.subsets is not None
    union = np.sum(obj.masks, axis=0) if have_players else full_mask(L)
    n_enc = len(obj.encoders) if obj.encoders is not None else 0
    grads = zero_gradients(model, n_encoders=n_enc,
                           enc_dim=obj.encoders[0].w.shape[0] if n_enc else 0)
    bd: dict[str, float] = {}
    total = 0.0

    # environment views (view 0 is the raw batch)
    M = obj.m_envs if (obj.lambda_env != 0.0 or obj.lambda_inv != 0.0) else 1
    rng_views = np.random.default_rng(list(obj.rng_seed) + [1])
    views = make_env_views_batch(X, M, obj.planted, rng_views)

    caches, Hs, dHs = [], [], []
    for V in views:
        H, cache = pair_features(model, V)
        Hs.append(H)
        caches.append(cache)
        dHs.append(np.zeros_like(H))

    P_union = [head(model, H, union) for H in Hs]
    dP_union = [np.zeros_like(P) for P in P_union]

    # weighted cross-entropy on the raw view
    ce_loss, ce_dp = _bce_terms(P_union[0], Y)
    ce = float((ce_loss * obj.alpha[None, :]).sum(axis=1).mean())
    bd["ce"] = _check_finite("weighted_ce", ce)
    total += obj.lambda_ce * ce
    dP_union[0] += obj.lambda_ce * ce_dp * obj.alpha[None, :] / B

    # rare-label regularizer
    rare_cols = sorted(obj.stats.rare_set)
    if obj.lambda_rare != 0.0 and rare_cols:
        rr_loss, rr_dp = _bce_terms(P_union[0][:, rare_cols], Y[:, rare_cols])
        rr = float(rr_loss.sum(axis=1).mean())
        bd["rare"] = _check_finite("rare_reg", rr)
        total += obj.lambda_rare * rr
        dP_union[0][:, rare_cols] += obj.lambda_rare * rr_dp / B
    else:
        bd["rare"] = 0.0

    # cross-environment prediction consistency
    if obj.lambda_env != 0.0:
        env = 0.0
        for m in range(M):
            el, edp = _bce_terms(P_union[m], Y)
            env += float(el.sum(axis=1).mean()) / M
            dP_union[m] += obj.lambda_env * edp / (M * B)
        bd["env"] = _check_finite("env_consistency", env)
        total += obj.lambda_env * env
    else:
        bd["env"] = 0.0

    # graph-learning loss on W
    if obj.lambda_graph != 0.0 and obj.wtilde is not None:
        gl, gW = graph_loss(model.W, obj.wtilde, obj.graph_cfg)
        bd["graph"] = _check_finite("graph_loss", gl)
        total += obj.lambda_graph * gl
        grads.W += obj.lambda_graph * gW
    else:
        bd["graph"] = 0.0

    # contrastive encoder invariance across views
    if obj.lambda_inv != 0.0 and obj.encoders is not None and M >= 2:
        inv = 0.0
        encs = [[encode_batch(enc, V) for V in views] for enc in obj.encoders]
        for k, hk in enumerate(encs):
            for m in range(M):
                dh = np.zeros_like(hk[m])
                for n in range(M):
                    if n == m:
                        continue
                    diff = hk[m] - hk[n]
                    if n > m:
                        inv += float((diff ** 2).sum(axis=1).mean())
                    dh += (2.0 / B) * diff
                dh *= obj.lambda_inv
                grads.enc_w[k] += dh.T @ views[m]
                grads.enc_b[k] += dh.sum(axis=0)
        bd["inv"] = _check_finite("contrastive_inv", inv)
        total += obj.lambda_inv * inv
    else:
        bd["inv"] = 0.0

    # curiosity surrogate: -beta * diversity + gamma_R * JS_cf
    bd["diversity"] = 0.0
    bd["cf_js"] = 0.0
    bd["rare_acc"] = 0.0
    if obj.lambda_rwd != 0.0 and have_players:
        N = len(obj.masks)
        P_pl = [head(model, Hs[0], Mk) for Mk in obj.masks]
        dP_pl = [np.zeros_like(P) for P in P_pl]

        # counterfactuals: salience = |d(mean prediction)/dx|, then perturb
        if obj.frozen_xcf is not None:
            Xcf = obj.frozen_xcf
        else:
            tmp = zero_gradients(model)
            dH_sal = np.zeros_like(Hs[0])
            head_backward(model, Hs[0], union, P_union[0],
                          np.full_like(P_union[0], 1.0 / L), tmp, dH_sal)
            dX = pair_backward(model, caches[0], dH_sal, tmp, need_dx=True)
            rng_cf = np.random.default_rng(list(obj.rng_seed) + [2])
            Xcf = np.stack([generate_counterfactual(X[i], dX[i],
                                                    obj.perturb_frac,
                                                    rng_cf, batch=X)
                            for i in range(B)])
        Hcf, cache_cf = pair_features(model, Xcf)
        dHcf = np.zeros_like(Hcf)
        P_cf = [head(model, Hcf, Mk) for Mk in obj.masks]
        dP_cf = [np.zeros_like(P) for P in P_cf]

        div_total, js_total, racc_total = 0.0, 0.0, 0.0
        freq = np.asarray(obj.stats.freq, dtype=np.float64)
        for k, sub in enumerate(obj.subsets):
            sub = np.asarray(sub, dtype=int)
            p_raw = P_pl[k][:, sub]
            p = clamp_probs(p_raw)
            in_p = (p_raw > PROB_EPS) & (p_raw < 1.0 - PROB_EPS)

            # rare-label accuracy (logged only; indicator has no gradient)
            correct = ((p_raw >= 0.5) == (Y[:, sub] >= 0.5)).astype(np.float64)
            racc_total += float((correct / (1.0 + freq[sub])[None, :]).mean())

            if N >= 2:
                r_raw = np.mean([P_pl[j][:, sub] for j in range(N) if j != k],
                                axis=0)
                r = clamp_probs(r_raw)
                in_r = (r_raw > PROB_EPS) & (r_raw < 1.0 - PROB_EPS)
                div_total += float(kl_bernoulli(p_raw, r_raw).mean())
                sc = obj.lambda_rwd * (-obj.beta) / (N * len(sub) * B)
                dp = (np.log(p / r) - np.log((1.0 - p) / (1.0 - r))) * in_p
                dP_pl[k][:, sub] += sc * dp
                dr = (-p / r + (1.0 - p) / (1.0 - r)) * in_r
                for j in range(N):
                    if j != k:
                        dP_pl[j][:, sub] += sc * dr / (N - 1)

            q_raw = P_cf[k][:, sub]
            q = clamp_probs(q_raw)
            in_q = (q_raw > PROB_EPS) & (q_raw < 1.0 - PROB_EPS)
            mmid = 0.5 * (p + q)
            js_total += float(js_bernoulli(p_raw, q_raw).mean())
            sc = obj.lambda_rwd * obj.gamma_r / (N * len(sub) * B)
            dP_pl[k][:, sub] += sc * 0.5 * np.log(
                p * (1.0 - mmid) / (mmid * (1.0 - p))) * in_p
            dP_cf[k][:, sub] += sc * 0.5 * np.log(
                q * (1.0 - mmid) / (mmid * (1.0 - q))) * in_q

        diversity = div_total / N
        js_cf = js_total / N
        bd["diversity"] = _check_finite("diversity", diversity)
        bd["cf_js"] = _check_finite("cf_js", js_cf)
        bd["rare_acc"] = racc_total / N
        total += obj.lambda_rwd * (-obj.beta * diversity + obj.gamma_r * js_cf)

        for k, Mk in enumerate(obj.masks):
            head_backward(model, Hs[0], Mk, P_pl[k], dP_pl[k], grads, dHs[0])
            head_backward(model, Hcf, Mk, P_cf[k], dP_cf[k], grads, dHcf)
        pair_backward(model, cache_cf, dHcf, grads)

    for m in range(len(views)):
        head_backward(model, Hs[m], union, P_union[m], dP_union[m], grads, dHs[m])
        pair_backward(model, caches[m], dHs[m], grads)

    bd["total"] = _check_finite("total", total)
    return total, grads, bd


class AdamW:
    """Adaptive moment estimation with decoupled weight decay; two rate
    groups (pair MLPs + encoders vs. W and b) and global-norm clipping."""

    def __init__(self, model: SemModel, encoders: list[PlayerEncoder] | None,
                 cfg: TrainConfig):
        self.cfg = cfg
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        # (name, lr, decay) in a fixed order matching _grad_arrays
        self.plan = [("w1", cfg.lr_main, True), ("b1", cfg.lr_main, False),
                     ("w2", cfg.lr_main, True), ("b2", cfg.lr_main, False),
                     ("W", cfg.lr_aux, False), ("b", cfg.lr_aux, False)]
        self.params = [model.param_arrays()[n] for n, _, _ in self.plan]
        self.lrs = [lr for _, lr, _ in self.plan]
        self.decays = [cfg.weight_decay if dec else 0.0 for _, _, dec in self.plan]
        if encoders:
            # matches GradientBundle.arrays(): all encoder weights, then biases
            for enc in encoders:
                self.params.append(enc.w)
                self.lrs.append(cfg.lr_main)
                self.decays.append(cfg.weight_decay)
            for enc in encoders:
                self.params.append(enc.b)
                self.lrs.append(cfg.lr_main)
                self.decays.append(0.0)
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: GradientBundle) -> None:
        gs = grads.arrays()
        if self.cfg.grad_clip > 0:
            norm = math.sqrt(sum(float((g ** 2).sum()) for g in gs))
            if norm > self.cfg.grad_clip:
                gs = [g * (self.cfg.grad_clip / norm) for g in gs]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v, lr, wd in zip(self.params, gs, self.m, self.v,
                                      self.lrs, self.decays):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g ** 2
            p -= lr * ((m / bc1) / (np.sqrt(v / bc2) + self.eps) + wd * p)


@dataclass
class TrainResult:
    model: SemModel
    encoders: list[PlayerEncoder]
    partition: Partition | None
    masks: MaskSet | None
    graph: CausalGraph | None
    stats: LabelStats
    wtilde: np.ndarray
    config: TrainConfig
    log: list[dict] = field(default_factory=list)
    aborted: bool = False


def _val_metrics(model, masks, val_ds, stats, rare_pct):
    union = masks.union() if masks is not None else None
    probs = evaluation.predict_dataset(model, val_ds, union)
    vmap = evaluation.mean_average_precision(probs, val_ds.Y)
    vf1 = evaluation.rare_f1(probs, val_ds.Y, stats, rare_pct)
    return vmap, vf1


def train(ds: Dataset, cfg: TrainConfig, planted: PlantedWorld | None = None,
          extra_envs: list[Dataset] | None = None) -> TrainResult:
    """Algorithm-1 training loop: ideal-weight estimation, warm-up of W,
    graph extraction and player partitioning (frozen thereafter), then
    full-composite epochs with early stopping on validation mAP."""
    if ds.n == 0:
        raise ValueError("dataset is empty")
    n = ds.n
    perm = np.random.default_rng([cfg.seed, 11]).permutation(n)
    n_val = int(round(cfg.val_frac * n))
    if 0 < n_val < n:
        val_ds = ds.subset(perm[:n_val])
        train_ds = ds.subset(perm[n_val:])
    else:
        val_ds = train_ds = ds

    stats = compute_label_stats(train_ds, cfg.rare_pct)
    alpha = (np.ones(ds.L) if cfg.uniform_alpha
             else alpha_weights(stats).alpha)
    wtilde = ideal_weights(train_ds, cfg.gamma)
    gcfg = cfg.graph_cfg(stats.rare_set)
    model = init_model(ds.d, ds.L, cfg.hidden, cfg.seed)
    encoders = init_encoders(ds.d, cfg.enc_dim, cfg.n_players, cfg.seed + 1)

    result = TrainResult(model=model, encoders=encoders, partition=None,
                         masks=None, graph=None, stats=stats, wtilde=wtilde,
                         config=cfg)
    if cfg.max_epochs == 0:
        return result

    steps_per_epoch = max(1, math.ceil(train_ds.n / cfg.batch_size))
    total_steps = steps_per_epoch * cfg.max_epochs
    rcfg = cfg.reward_cfg(total_steps)
    opt = AdamW(model, encoders, cfg)

    partition: Partition | None = None
    masks: MaskSet | None = None
    graph: CausalGraph | None = None
    best = {"map": -1.0, "epoch": -1, "model": None, "enc": None}
    global_step = 0

    def build_partition():
        src = co_occurrence(train_ds) if cfg.partition_source == "cooccur" else model.W
        g = extract_graph(src, cfg.k_topk, warmup_done=True)
        p = partition_labels(g, min(cfg.n_players, ds.L), stats.freq)
        return g, p, build_masks(p, g)

    try:
        for epoch in range(cfg.max_epochs):
            if epoch == cfg.warmup_epochs and partition is None:
                graph, partition, masks = build_partition()
            warm = partition is None
            order = np.random.default_rng([cfg.seed, 12, epoch]).permutation(train_ds.n)
            ep_terms: dict[str, float] = {}
            nb = 0
            beta = gamma_r = 0.0
            for bi in range(steps_per_epoch):
                idx = order[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
                if len(idx) == 0:
                    continue
                beta, gamma_r = anneal(min(global_step, total_steps), total_steps, rcfg)
                obj = ObjectiveSpec(
                    alpha=alpha, stats=stats, graph_cfg=gcfg, wtilde=wtilde,
                    subsets=None if warm else partition.subsets,
                    masks=None if warm else masks.masks,
                    encoders=encoders,
                    lambda_rare=cfg.lambda_rare,
                    lambda_graph=cfg.lambda_graph,
                    lambda_inv=0.0 if warm else cfg.lambda_inv,
                    lambda_env=0.0 if warm else cfg.lambda_env,
                    lambda_rwd=0.0 if warm else cfg.lambda_rwd,
                    beta=beta, gamma_r=gamma_r, m_envs=cfg.m_envs,
                    planted=planted, perturb_frac=cfg.perturb_frac,
                    rng_seed=(cfg.seed, 13, epoch, bi))
                total, grads, bd = composite_value_and_grads(
                    model, train_ds.X[idx], train_ds.Y[idx], obj)
                opt.step(grads)
                project_diagonal(model)
                global_step += 1
                nb += 1
                for key, val in bd.items():
                    ep_terms[key] = ep_terms.get(key, 0.0) + val

            vmap, vf1 = _val_metrics(model, masks, val_ds, stats, cfg.rare_pct)
            entry = {"epoch": epoch,
                     "beta": beta, "gamma_r": gamma_r,
                     "val_map": vmap, "val_rare_f1": vf1,
                     "n_players": partition.N if partition else 0}
            for key, val in sorted(ep_terms.items()):
                entry[key] = val / max(1, nb)
            if extra_envs:
                omap, _ = _val_metrics(model, masks, extra_envs[0], stats, cfg.rare_pct)
                entry["ood_map"] = omap
            result.log.append(entry)

            # warmup epochs are evaluated unmasked and aren't comparable to
            # the masked predictor returned at the end, so best-checkpoint
            # selection only starts once the partition exists
            if partition is not None and vmap > best["map"]:
                best.update(map=vmap, epoch=epoch, model=model.copy(),
                            enc=[PlayerEncoder(e.w.copy(), e.b.copy())
                                 for e in encoders])
            if epoch - best["epoch"] >= cfg.patience and epoch >= cfg.warmup_epochs:
                break
    except NumericalError:
        result.aborted = True

    if best["model"] is not None:
        result.model = model = best["model"]
        result.encoders = encoders = best["enc"]
    if partition is None and not result.aborted:
        graph, partition, masks = build_partition()
    result.graph, result.partition, result.masks = graph, partition, masks
    return result


# ---------------------------------------------------------------------------
# run persistence

def save_run(run_dir: str, result: TrainResult) -> None:
    os.makedirs(run_dir, exist_ok=True)
    m = result.model
    model_obj = {
        "d": m.d, "L": m.L, "hidden": m.hidden,
        "params": {k: v.tolist() for k, v in m.param_arrays().items()},
        "encoders": [{"w": e.w.tolist(), "b": e.b.tolist()}
                     for e in result.encoders],
        "players": result.partition.subsets if result.partition else None,
        "config": asdict(result.config),
    }
    with open(os.path.join(run_dir, "model.json"), "w") as fh:
        json.dump(model_obj, fh, sort_keys=True)
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(asdict(result.config), fh, sort_keys=True, indent=2)
    with open(os.path.join(run_dir, "stats.json"), "w") as fh:
        json.dump({"freq": result.stats.freq.tolist(),
                   "rare_pct": result.stats.rare_pct,
                   "rare_set": sorted(result.stats.rare_set)}, fh, sort_keys=True)
    if result.graph is not None:
        save_graph(result.graph, os.path.join(run_dir, "graph.json"))
    with open(os.path.join(run_dir, "log.jsonl"), "w") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def load_run(run_dir: str):
    """Rebuild (model, encoders, partition, masks, graph, stats, config)."""
    with open(os.path.join(run_dir, "model.json")) as fh:
        obj = json.load(fh)
    params = {k: np.array(v, dtype=np.float64) for k, v in obj["params"].items()}
    model = SemModel(d=obj["d"], L=obj["L"], hidden=obj["hidden"], **params)
    encoders = [PlayerEncoder(w=np.array(e["w"]), b=np.array(e["b"]))
                for e in obj["encoders"]]
    cfg = TrainConfig(**obj["config"])
    with open(os.path.join(run_dir, "stats.json")) as fh:
        st = json.load(fh)
    stats = LabelStats(freq=np.array(st["freq"], dtype=np.int64),
                       rare_set=frozenset(st["rare_set"]),
                       rare_pct=st["rare_pct"])
    graph = partition = masks = None
    gpath = os.path.join(run_dir, "graph.json")
    if os.path.exists(gpath):
        graph = load_graph(gpath)
        if obj["players"] is not None:
            subsets = [sorted(int(x) for x in sub) for sub in obj["players"]]
            chains = []
            for sub in subsets:
                s = set(sub)
                chains.append(sorted([e for e in graph.edges
                                      if e[0] in s and e[1] in s],
                                     key=lambda e: (e[0], e[1])))
            partition = Partition(subsets=subsets, chains=chains)
            masks = build_masks(partition, graph)
    return model, encoders, partition, masks, graph, stats, cfg
