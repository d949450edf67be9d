"""Ranking metrics, rare-label F1, OOD deltas, and structure recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, LabelStats, PlantedWorld, rare_set_for
from .graph import CausalGraph
from .sem import SemModel, predict_batch


@dataclass
class MetricsReport:
    map: float
    rare_f1: dict[float, float]
    per_label_ap: list[float | None]   # None for labels with no positives
    ood_delta: tuple[float, dict[float, float]] | None = None
    structure: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        out = {"map": self.map,
               "rare_f1": {str(p): v for p, v in self.rare_f1.items()},
               "per_label_ap": self.per_label_ap}
        if self.ood_delta is not None:
            out["ood_delta"] = {"map_drop": self.ood_delta[0],
                                "rare_f1_drop": {str(p): v for p, v
                                                 in self.ood_delta[1].items()}}
        if self.structure is not None:
            out["structure"] = {"precision": self.structure[0],
                                "recall": self.structure[1]}
        return out

    def to_csv(self) -> str:
        rows = ["metric,value", f"map,{self.map}"]
        for p, v in sorted(self.rare_f1.items()):
            rows.append(f"rare_f1@{p},{v}")
        if self.ood_delta is not None:
            rows.append(f"ood_map_drop,{self.ood_delta[0]}")
            for p, v in sorted(self.ood_delta[1].items()):
                rows.append(f"ood_rare_f1_drop@{p},{v}")
        if self.structure is not None:
            rows.append(f"structure_precision,{self.structure[0]}")
            rows.append(f"structure_recall,{self.structure[1]}")
        return "\n".join(rows) + "\n"


def average_precision(scores: np.ndarray, y: np.ndarray) -> float:
    """AP with ranking by descending score, ties broken by ascending sample
    index: mean over positives of precision at that positive's rank."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if y.sum() == 0:
        raise ValueError("average_precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = 0
    precisions = []
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            hits += 1
            precisions.append(hits / rank)
    return float(np.mean(precisions))


def per_label_average_precision(probs: np.ndarray, Y: np.ndarray) -> list:
    """AP per label; None where a label has no positives (excluded from mAP)."""
    out = []
    for lab in range(Y.shape[1]):
        if Y[:, lab].sum() == 0:
            out.append(None)
        else:
            out.append(average_precision(probs[:, lab], Y[:, lab]))
    return out


def mean_average_precision(probs: np.ndarray, Y: np.ndarray) -> float:
    aps = [a for a in per_label_average_precision(probs, Y) if a is not None]
    return float(np.mean(aps)) if aps else 0.0


def _f1(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    prec = tp / (tp + fp)
    rec = tp / (tp + fn)
    return 2 * prec * rec / (prec + rec)


def rare_f1(preds: np.ndarray, y: np.ndarray, stats: LabelStats, p: float,
            micro: bool = False) -> float:
    """F1 over the bottom-p% labels by training frequency, predictions
    thresholded at 0.5. Macro by default; micro behind the flag."""
    cols = sorted(rare_set_for(np.asarray(stats.freq), p))
    if not cols:
        return 0.0
    yhat = (np.asarray(preds)[:, cols] >= 0.5).astype(int)
    yt = np.asarray(y)[:, cols].astype(int)
    if micro:
        tp = int(((yhat == 1) & (yt == 1)).sum())
        fp = int(((yhat == 1) & (yt == 0)).sum())
        fn = int(((yhat == 0) & (yt == 1)).sum())
        return _f1(tp, fp, fn)
    scores = []
    for c in range(len(cols)):
        tp = int(((yhat[:, c] == 1) & (yt[:, c] == 1)).sum())
        fp = int(((yhat[:, c] == 1) & (yt[:, c] == 0)).sum())
        fn = int(((yhat[:, c] == 0) & (yt[:, c] == 1)).sum())
        scores.append(_f1(tp, fp, fn))
    return float(np.mean(scores))


def structure_score(learned: CausalGraph, planted: PlantedWorld) -> tuple[float, float]:
    """Direction-sensitive edge precision/recall against the planted DAG."""
    if learned.L != planted.L:
        raise ValueError("label count mismatch")
    le = learned.edge_set()
    pe = planted.edge_set()
    inter = len(le & pe)
    precision = inter / len(le) if le else 0.0
    recall = inter / len(pe) if pe else 0.0
    return precision, recall


def predict_dataset(model: SemModel, ds: Dataset,
                    union_mask: np.ndarray | None = None,
                    batch: int = 256) -> np.ndarray:
    """Full-model probabilities: the union of per-player masked predictions
    (equivalently, one pass with the summed mask)."""
    chunks = [predict_batch(model, ds.X[i:i + batch], union_mask)
              for i in range(0, ds.n, batch)]
    return np.concatenate(chunks, axis=0)


def evaluate(model: SemModel, partition, masks, ds_id: Dataset,
             ds_ood: Dataset | None, stats: LabelStats,
             p_list: list[float], learned_graph: CausalGraph | None = None,
             planted: PlantedWorld | None = None) -> MetricsReport:
    union = masks.union() if masks is not None else None
    probs = predict_dataset(model, ds_id, union)
    id_map = mean_average_precision(probs, ds_id.Y)
    id_f1 = {p: rare_f1(probs, ds_id.Y, stats, p) for p in p_list}
    report = MetricsReport(map=id_map, rare_f1=id_f1,
                           per_label_ap=per_label_average_precision(probs, ds_id.Y))
    if ds_ood is not None:
        probs_o = predict_dataset(model, ds_ood, union)
        ood_map = mean_average_precision(probs_o, ds_ood.Y)
        ood_f1 = {p: rare_f1(probs_o, ds_ood.Y, stats, p) for p in p_list}
        report.ood_delta = (id_map - ood_map,
                            {p: id_f1[p] - ood_f1[p] for p in p_list})
    if planted is not None and learned_graph is not None:
        report.structure = structure_score(learned_graph, planted)
    return report
