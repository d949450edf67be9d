"""Datasets, label statistics, and the planted-world synthetic generator.

A dataset is a dense pair (X, Y): real feature vectors of length d and
binary label vectors of length L. The synthetic generator plants a label
DAG with noisy-OR dynamics, per-label causal feature blocks, per-pair
spurious feature blocks, and shiftable environments so that structure
recovery and OOD robustness can be scored against known ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DatasetError


@dataclass(frozen=True)
class Sample:
    features: np.ndarray  # (d,) float64
    labels: np.ndarray    # (L,) int, entries in {0,1}


@dataclass
class Dataset:
    X: np.ndarray  # (n, d) float64
    Y: np.ndarray  # (n, L) int8
    label_names: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.int8)
        if self.X.ndim != 2 or self.Y.ndim != 2 or len(self.X) != len(self.Y):
            raise DatasetError("features/labels shape mismatch")
        if not np.isin(self.Y, (0, 1)).all():
            raise DatasetError("label not binary")
        if not np.isfinite(self.X).all():
            raise DatasetError("non-finite feature value")
        if len(self.label_names) != self.L or len(set(self.label_names)) != self.L:
            raise DatasetError("label_names must be L unique strings")

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.Y.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(self.X[i], self.Y[i]) for i in range(self.n)]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx], list(self.label_names))


def default_label_names(L: int) -> list[str]:
    return [f"L{i}" for i in range(L)]


@dataclass
class LabelStats:
    freq: np.ndarray        # (L,) nonnegative counts
    rare_set: frozenset     # label indices in the bottom rare_pct%
    rare_pct: float


def rare_set_for(freq: np.ndarray, pct: float) -> frozenset:
    """Bottom-pct% labels by frequency; ties broken by smaller index."""
    L = len(freq)
    if pct <= 0 or L == 0:
        return frozenset()
    k = math.ceil(L * pct / 100.0)
    order = np.lexsort((np.arange(L), np.asarray(freq)))
    return frozenset(int(i) for i in order[:k])


def compute_label_stats(ds: Dataset, rare_pct: float) -> LabelStats:
    if not 0 <= rare_pct <= 100:
        raise ValueError("rare_pct must be in [0, 100]")
    freq = ds.Y.astype(np.int64).sum(axis=0)
    return LabelStats(freq=freq, rare_set=rare_set_for(freq, rare_pct), rare_pct=rare_pct)


def load_dataset(path, expected_d: int | None = None) -> Dataset:
    """Read a JSONL dataset: one {"features": [...], "labels": [...]} per line."""
    feats, labs = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                f = obj["features"]
                y = obj["labels"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"line {lineno}: parse error ({exc})") from exc
            if any(v not in (0, 1) for v in y):
                raise DatasetError(f"line {lineno}: label not binary")
            if feats:
                if len(f) != len(feats[0]):
                    raise DatasetError(f"line {lineno}: inconsistent feature dimension")
                if len(y) != len(labs[0]):
                    raise DatasetError(f"line {lineno}: inconsistent label dimension")
            feats.append([float(v) for v in f])
            labs.append([int(v) for v in y])
    if not feats:
        raise DatasetError("empty dataset")
    if expected_d is not None and len(feats[0]) != expected_d:
        raise DatasetError(f"expected d={expected_d}, file has d={len(feats[0])}")
    X = np.array(feats, dtype=np.float64)
    Y = np.array(labs, dtype=np.int8)
    return Dataset(X, Y, default_label_names(Y.shape[1]))


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        for i in range(ds.n):
            rec = {"features": [float(v) for v in ds.X[i]],
                   "labels": [int(v) for v in ds.Y[i]]}
            fh.write(json.dumps(rec) + "\n")


@dataclass
class PlantedWorld:
    """Ground truth behind a synthetic dataset."""
    L: int
    d: int
    edges: list[tuple[int, int, float]]          # (src j, dst i, strength)
    causal_blocks: dict[int, list[int]]          # label -> feature indices
    spurious_blocks: dict[tuple[int, int], list[int]]  # (a, b) -> feature indices
    env_params: list[dict] = field(default_factory=list)  # per-env mean/var multipliers

    def edge_set(self) -> set[tuple[int, int]]:
        return {(j, i) for (j, i, _) in self.edges}

    def spurious_indices(self) -> np.ndarray:
        idx = sorted({f for blk in self.spurious_blocks.values() for f in blk})
        return np.array(idx, dtype=np.int64)

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "d": self.d,
            "edges": [{"src": j, "dst": i, "strength": s} for (j, i, s) in self.edges],
            "causal_blocks": {str(k): v for k, v in self.causal_blocks.items()},
            "spurious_blocks": {f"{a}-{b}": v for (a, b), v in self.spurious_blocks.items()},
            "env_params": self.env_params,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlantedWorld":
        return cls(
            L=int(obj["L"]),
            d=int(obj["d"]),
            edges=[(int(e["src"]), int(e["dst"]), float(e["strength"])) for e in obj["edges"]],
            causal_blocks={int(k): [int(x) for x in v] for k, v in obj["causal_blocks"].items()},
            spurious_blocks={tuple(int(x) for x in k.split("-")): [int(x) for x in v]
                             for k, v in obj["spurious_blocks"].items()},
            env_params=list(obj["env_params"]),
        )


def topological_order(world: PlantedWorld) -> list[int]:
    """Topological order of the planted DAG; raises if cyclic."""
    indeg = {i: 0 for i in range(world.L)}
    out = {i: [] for i in range(world.L)}
    for j, i, _ in world.edges:
        indeg[i] += 1
        out[j].append(i)
    queue = sorted(i for i in range(world.L) if indeg[i] == 0)
    order = []
    while queue:
        v = queue.pop(0)
        order.append(v)
        for w in sorted(out[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
        queue.sort()
    if len(order) != world.L:
        raise ValueError("planted graph has a cycle")
    return order


ROOT_PROB = 0.3
FEATURE_NOISE_STD = 0.1


def sample_labels(world: PlantedWorld, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ancestral noisy-OR sampling: roots Bernoulli(0.3), a child fires with
    probability 1 - prod(1 - s_e) over its currently-active parent edges."""
    order = topological_order(world)
    parents = {i: [] for i in range(world.L)}
    for j, i, s in world.edges:
        parents[i].append((j, s))
    Y = np.zeros((n, world.L), dtype=np.int8)
    for i in order:
        if not parents[i]:
            p = np.full(n, ROOT_PROB)
        else:
            keep = np.ones(n)
            for j, s in sorted(parents[i]):
                keep *= 1.0 - s * Y[:, j]
            p = 1.0 - keep
        Y[:, i] = (rng.random(n) < p).astype(np.int8)
    return Y


def sample_features(world: PlantedWorld, Y: np.ndarray, env: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = len(Y)
    X = rng.normal(0.0, FEATURE_NOISE_STD, size=(n, world.d))
    for lab in sorted(world.causal_blocks):
        blk = world.causal_blocks[lab]
        X[:, blk] += Y[:, lab, None].astype(np.float64)
    params = world.env_params[env]
    mm, vm = float(params["mean_mult"]), float(params["var_mult"])
    for (a, b) in sorted(world.spurious_blocks):
        blk = world.spurious_blocks[(a, b)]
        active = (Y[:, a] & Y[:, b]).astype(np.float64)
        noise = rng.normal(0.0, FEATURE_NOISE_STD * math.sqrt(vm), size=(n, len(blk)))
        X[:, blk] = noise + mm * active[:, None]
    return X


def build_world(L: int, d: int, seed: int, edge_density: float) -> PlantedWorld:
    if L < 2:
        raise ValueError("L must be >= 2")
    if d < 4 * L:
        raise CapacityError(f"d={d} too small; need d >= 4*L = {4 * L}")
    rng = np.random.default_rng([seed, 0])
    pairs = [(j, i) for j in range(L) for i in range(j + 1, L)]
    n_edges = int(round(edge_density * len(pairs)))
    n_edges = min(n_edges, len(pairs))
    edges = []
    if n_edges > 0:
        chosen = rng.choice(len(pairs), size=n_edges, replace=False)
        for k in sorted(int(c) for c in chosen):
            j, i = pairs[k]
            edges.append((j, i, float(rng.uniform(0.5, 0.95))))
    c_sz = 2 if d < 6 * L else 3
    causal_blocks = {lab: list(range(lab * c_sz, (lab + 1) * c_sz)) for lab in range(L)}
    cursor = L * c_sz
    spurious_blocks = {}
    if edges:
        s_sz = min(4, (d - cursor) // len(edges))
        if s_sz < 1:
            raise CapacityError("d too small for spurious blocks")
        for (j, i, _) in edges:
            spurious_blocks[(j, i)] = list(range(cursor, cursor + s_sz))
            cursor += s_sz
    return PlantedWorld(L=L, d=d, edges=edges, causal_blocks=causal_blocks,
                        spurious_blocks=spurious_blocks, env_params=[])


def default_env_params(n_envs: int) -> list[dict]:
    """Env 0 is the reference; later envs shift spurious-block statistics."""
    params = [{"mean_mult": 1.0, "var_mult": 1.0}]
    for e in range(1, n_envs):
        params.append({"mean_mult": max(-1.0, 1.0 - float(e)), "var_mult": 1.0 + 0.5 * e})
    return params


def generate_from_world(world: PlantedWorld, n: int, seed: int) -> list[Dataset]:
    """Sample one dataset per environment described by world.env_params."""
    names = default_label_names(world.L)
    out = []
    for env in range(len(world.env_params)):
        rng = np.random.default_rng([seed, 1, env])
        Y = sample_labels(world, n, rng)
        X = sample_features(world, Y, env, rng)
        out.append(Dataset(X, Y, names))
    return out


def generate_synthetic(L: int, d: int, n: int, n_envs: int, seed: int,
                       edge_density: float = 0.15) -> tuple[list[Dataset], PlantedWorld]:
    if n < 1 or n_envs < 1:
        raise ValueError("n and n_envs must be >= 1")
    world = build_world(L, d, seed, edge_density)
    world.env_params = default_env_params(n_envs)
    return generate_from_world(world, n, seed), world


def co_occurrence(ds: Dataset) -> np.ndarray:
    """Directed conditional frequency: entry (i, j) = P(label i | label j)."""
    if ds.n == 0:
        raise DatasetError("empty dataset")
    Y = ds.Y.astype(np.float64)
    joint = Y.T @ Y
    col = Y.sum(axis=0)
    M = joint / np.maximum(col, 1.0)[None, :]
    np.fill_diagonal(M, 0.0)
    return M


def semantic_similarity(ds: Dataset) -> np.ndarray:
    """Cosine similarity of per-label feature centroids, clamped to [0, 1]."""
    if ds.n == 0:
        raise DatasetError("empty dataset")
    L = ds.L
    cents = np.zeros((L, ds.d))
    has = np.zeros(L, dtype=bool)
    for lab in range(L):
        mask = ds.Y[:, lab] == 1
        if mask.any():
            cents[lab] = ds.X[mask].mean(axis=0)
            has[lab] = True
    norms = np.linalg.norm(cents, axis=1)
    M = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            if i == j or not (has[i] and has[j]):
                continue
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            M[i, j] = float(cents[i] @ cents[j] / (norms[i] * norms[j]))
    return np.clip(M, 0.0, 1.0)
