"""Causal graph extraction, rare-edge prior, and the graph-learning loss."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, co_occurrence, semantic_similarity


@dataclass
class CausalGraph:
    L: int
    edges: list[tuple[int, int, float]]  # (src j, dst i, strength)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(j, i) for (j, i, _) in self.edges}

    def to_json(self) -> dict:
        return {"L": self.L,
                "edges": [{"src": j, "dst": i, "strength": s} for (j, i, s) in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "CausalGraph":
        return cls(L=int(obj["L"]),
                   edges=[(int(e["src"]), int(e["dst"]), float(e["strength"]))
                          for e in obj["edges"]])


@dataclass
class GraphLossConfig:
    gamma: float = 0.5            # co-occurrence vs semantic blend
    eta: float = 1.5              # rare-edge enhancement factor
    lambda_selfloop: float = 0.1  # l0 self-loop suppression coefficient
    rare_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.eta < 1.0:
            raise ValueError("eta must be >= 1")
        if self.lambda_selfloop < 0.0:
            raise ValueError("lambda_selfloop must be >= 0")


def rare_indicator(i: int, j: int, rare_set) -> int:
    return 1 if (i in rare_set or j in rare_set) else 0


def psi(eta: float, indicator: int) -> float:
    """Rare-edge enhancement multiplier eta**indicator."""
    if eta < 1.0:
        raise ValueError("eta must be >= 1")
    return float(eta) if indicator else 1.0


def rare_indicator_matrix(L: int, rare_set) -> np.ndarray:
    ind = np.zeros((L, L))
    rare = np.zeros(L, dtype=bool)
    for r in rare_set:
        rare[r] = True
    ind[rare, :] = 1.0
    ind[:, rare] = 1.0
    return ind


def ideal_weights(ds: Dataset, gamma: float) -> np.ndarray:
    """Blend gamma * co-occurrence + (1 - gamma) * semantic similarity."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    M = gamma * co_occurrence(ds) + (1.0 - gamma) * semantic_similarity(ds)
    np.fill_diagonal(M, 0.0)
    return M


def graph_loss(W: np.ndarray, Wtilde: np.ndarray,
               cfg: GraphLossConfig) -> tuple[float, np.ndarray]:
    """Rare-enhanced squared deviation from the ideal weights, plus an l0
    count of diagonal entries. The l0 term is reported but contributes zero
    gradient; self-loops are instead removed by diagonal projection."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape != Wtilde.shape:
        raise ValueError("shape mismatch between W and Wtilde")
    L = W.shape[0]
    ind = rare_indicator_matrix(L, cfg.rare_set)
    psi_mat = np.where(ind > 0, cfg.eta, 1.0)
    off = 1.0 - np.eye(L)
    diff = (W - Wtilde) * off
    quad = float((psi_mat * diff ** 2 * off).sum())
    l0 = float(np.count_nonzero(np.diag(W)))
    loss = quad + cfg.lambda_selfloop * l0
    grad = 2.0 * psi_mat * diff * off
    return loss, grad


def extract_graph(W: np.ndarray, K: int, warmup_done: bool = True) -> CausalGraph:
    """Top-K positive outgoing strengths per source label; ties to smaller
    target index. Callers gate extraction on warmup completion."""
    if K < 1:
        raise ValueError("K must be >= 1")
    W = np.asarray(W, dtype=np.float64)
    L = W.shape[0]
    edges = []
    for j in range(L):
        cands = [(i, float(W[i, j])) for i in range(L) if i != j and W[i, j] > 0.0]
        cands.sort(key=lambda t: (-t[1], t[0]))
        for i, s in cands[:K]:
            edges.append((j, i, s))
    edges.sort(key=lambda e: (e[0], e[1]))
    return CausalGraph(L=L, edges=edges)


def export_dot(g: CausalGraph, label_names: list[str] | None = None) -> str:
    """Deterministic DOT rendering with 2-decimal edge strengths."""
    names = label_names if label_names is not None else [f"L{i}" for i in range(g.L)]
    lines = ["digraph G {"]
    for name in names:
        lines.append(f'  "{name}";')
    for (j, i, s) in sorted(g.edges, key=lambda e: (e[0], e[1])):
        lines.append(f'  "{names[j]}" -> "{names[i]}" [label="{s:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_graph(g: CausalGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_graph(path) -> CausalGraph:
    with open(path) as fh:
        return CausalGraph.from_json(json.load(fh))
