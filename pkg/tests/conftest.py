import numpy as np
import pytest

from ccg.data import Dataset, compute_label_stats, default_label_names
from ccg.graph import extract_graph
from ccg.players import build_masks, init_encoders, partition_labels
from ccg.sem import init_model


def toy_dataset(n=12, d=6, L=4, seed=0, pos_rate=0.5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    Y = (rng.random((n, L)) < pos_rate).astype(np.int8)
    Y[0] = 1  # ensure every label has at least one positive
    return Dataset(X, Y, default_label_names(L))


def toy_setup(L=4, d=6, hidden=5, B=5, N=2, seed=0):
    """Random model + dataset + partition/masks/encoders for gradient tests."""
    rng = np.random.default_rng(seed)
    ds = toy_dataset(n=B, d=d, L=L, seed=seed + 1)
    stats = compute_label_stats(ds, 50)
    model = init_model(d, L, hidden, seed=seed + 2)
    model.W += rng.normal(0, 0.3, (L, L))
    np.fill_diagonal(model.W, 0.0)
    g = extract_graph(rng.normal(0.5, 0.3, (L, L)), 2)
    part = partition_labels(g, N, stats.freq)
    masks = build_masks(part, g)
    encs = init_encoders(d, 4, N, seed=seed + 3)
    wt = np.clip(rng.normal(0.3, 0.2, (L, L)), 0.0, 1.0)
    np.fill_diagonal(wt, 0.0)
    return ds, stats, model, g, part, masks, encs, wt


def fd_probe(value_fn, arrays, n_probes=20, step=1e-5, seed=0,
             skip=None):
    """Central finite differences on random parameter coordinates.

    value_fn() -> (scalar, list of gradient arrays aligned with `arrays`).
    Returns the worst relative error; absolute differences below 1e-8
    (finite-difference roundoff on near-zero gradients) count as exact.
    """
    _, grads = value_fn()
    rng = np.random.default_rng(seed)
    worst = 0.0
    probes = 0
    while probes < n_probes:
        pi = int(rng.integers(len(arrays)))
        arr = arrays[pi]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        if skip is not None and skip(pi, idx):
            continue
        old = arr[idx]
        arr[idx] = old + step
        fp, _ = value_fn()
        arr[idx] = old - step
        fm, _ = value_fn()
        arr[idx] = old
        fd = (fp - fm) / (2 * step)
        an = grads[pi][idx]
        diff = abs(an - fd)
        if diff >= 1e-8:
            worst = max(worst, diff / max(abs(fd), abs(an)))
        probes += 1
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
