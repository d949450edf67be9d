"""Label partitioning into players, causal masks, and per-player encoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CausalGraph
from .sem import SemModel, pair_features, head


@dataclass
class Partition:
    subsets: list[list[int]]                    # N disjoint, sorted label subsets
    chains: list[list[tuple[int, int, float]]]  # graph edges internal to each subset

    @property
    def N(self) -> int:
        return len(self.subsets)


@dataclass
class MaskSet:
    masks: list[np.ndarray]  # N binary (L, L) matrices

    def union(self) -> np.ndarray:
        return np.sum(self.masks, axis=0)


@dataclass
class PlayerEncoder:
    w: np.ndarray  # (e, d)
    b: np.ndarray  # (e,)


def init_encoders(d: int, e: int, N: int, seed: int) -> list[PlayerEncoder]:
    rng = np.random.default_rng(seed)
    a = np.sqrt(6.0 / (d + e))
    return [PlayerEncoder(w=rng.uniform(-a, a, size=(e, d)), b=np.zeros(e))
            for _ in range(N)]


def player_encode(enc: PlayerEncoder, x: np.ndarray) -> np.ndarray:
    return enc.w @ np.asarray(x, dtype=np.float64) + enc.b


def encode_batch(enc: PlayerEncoder, X: np.ndarray) -> np.ndarray:
    return X @ enc.w.T + enc.b


def _components(L: int, edges) -> list[list[int]]:
    """Weakly-connected components (singletons included), each sorted,
    ordered by smallest member."""
    parent = list(range(L))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (j, i, _) in edges:
        ra, rb = find(j), find(i)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in range(L):
        groups.setdefault(find(v), []).append(v)
    comps = [sorted(g) for g in groups.values()]
    comps.sort(key=lambda c: c[0])
    return comps


def partition_labels(g: CausalGraph, N: int, freq: np.ndarray) -> Partition:
    """Partition labels into exactly N subsets. Start from weakly-connected
    components of the learned graph; merge the two lowest-frequency
    components while there are too many, or split the largest component by
    dropping its weakest internal edges while there are too few."""
    L = g.L
    if N < 1 or N > L:
        raise ValueError(f"N must be in [1, {L}]")
    freq = np.asarray(freq)
    edges = list(g.edges)
    comps = _components(L, edges)

    while len(comps) > N:
        # merge the two components with smallest total label frequency
        scored = sorted(comps, key=lambda c: (int(freq[c].sum()), c[0]))
        a, b = scored[0], scored[1]
        comps = [c for c in comps if c is not a and c is not b]
        comps.append(sorted(a + b))
        comps.sort(key=lambda c: c[0])

    while len(comps) < N:
        # split the largest component (ties: smallest min label index) by
        # removing its weakest internal edges until it disconnects
        comp = sorted(comps, key=lambda c: (-len(c), c[0]))[0]
        comp_set = set(comp)
        internal = [e for e in edges if e[0] in comp_set and e[1] in comp_set]
        internal.sort(key=lambda e: (e[2], e[0], e[1]))
        for e in internal:
            edges.remove(e)
            remaining = [x for x in edges if x[0] in comp_set and x[1] in comp_set]
            pieces = [c for c in _components(L, remaining) if set(c) <= comp_set]
            if len(pieces) > 1:
                break
        comps = _components(L, edges)

    subsets = [list(c) for c in comps]
    chains = []
    for sub in subsets:
        s = set(sub)
        chains.append(sorted([e for e in g.edges if e[0] in s and e[1] in s],
                             key=lambda e: (e[0], e[1])))
    return Partition(subsets=subsets, chains=chains)


def build_masks(p: Partition, g: CausalGraph) -> MaskSet:
    """m_ij^(k) = 1 iff edge (l_j -> l_i) is in the graph and both endpoints
    lie in subset k."""
    masks = []
    for sub in p.subsets:
        s = set(sub)
        M = np.zeros((g.L, g.L))
        for (j, i, _) in g.edges:
            if j in s and i in s:
                M[i, j] = 1.0
        masks.append(M)
    return MaskSet(masks=masks)


def player_predict(model: SemModel, partition: Partition, masks: MaskSet,
                   x: np.ndarray) -> list[np.ndarray]:
    """Per-player probability vectors restricted to each player's subset."""
    H, _ = pair_features(model, np.asarray(x, dtype=np.float64)[None, :])
    out = []
    for sub, M in zip(partition.subsets, masks.masks):
        probs = head(model, H, M)[0]
        out.append(probs[np.array(sub, dtype=int)])
    return out
