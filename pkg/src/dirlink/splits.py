"""Benchmark task setup: edge splitting, negative sampling, feature inputs.

The split keeps the training graph weakly connected by pinning one directed
edge per spanning connection of the underlying undirected graph into the
train set; test and validation positives are drawn uniformly from whatever
remains removable.  Evaluation negatives are sampled with the full graph
visible; training negatives exclude only training edges, so held-out
positives stay eligible (excluding them would leak test labels).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import (
    DataError,
    DirectedGraph,
    UnionFind,
    degrees,
    save_edge_list,
    weakly_connected_components,
)

DEFAULT_RATIOS = (0.80, 0.05, 0.15)
DEFAULT_SEEDS = tuple(range(10))


@dataclass
class SplitBundle:
    """One benchmark split: positives by role, fixed evaluation negatives,
    the seed that produced it, and the training graph built from train_pos."""

    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray
    seed: int
    train_graph: DirectedGraph
    ratios: tuple = DEFAULT_RATIOS


@dataclass
class FeatureInit:
    """Feature input choice: the dataset's own features, train-graph degrees,
    or seeded standard-normal noise of width dim."""

    mode: str = "degrees"
    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("original", "degrees", "random"):
            raise ValueError(f"unknown feature mode {self.mode!r}")


def split_edges(g, ratios=DEFAULT_RATIOS, seed=0):
    """Split g's edges into train/val/test keeping the train graph weakly connected.

    Holdout sizes use floor rounding: |test| = floor(r_test * m),
    |val| = floor(r_val * m), remainder to train.  Raises if the holdout
    cannot be reached without disconnecting the training graph.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be a nonnegative triple summing to 1, got {ratios}")
    if weakly_connected_components(g).max() != 0:
        raise DataError("split requires a weakly connected graph; run preprocess first")
    m = g.edge_count
    # the epsilon keeps exact products like 0.15*500 from flooring to 74
    n_val = int(np.floor(ratios[1] * m + 1e-9))
    n_test = int(np.floor(ratios[2] * m + 1e-9))

    root = np.random.SeedSequence(seed)
    shuffle_ss, neg_ss = root.spawn(2)
    order = np.random.default_rng(shuffle_ss).permutation(m)
    shuffled = g.edges[order]

    index_of = {(int(u), int(v)): i for i, (u, v) in enumerate(shuffled)}
    uf = UnionFind(g.n)
    pinned = np.zeros(m, dtype=bool)
    for i, (u, v) in enumerate(shuffled):
        if uf.union(int(u), int(v)):
            # one directed edge per undirected spanning connection stays in
            # train; with both directions present the lexicographic smaller wins
            cand = (int(u), int(v))
            rev = (cand[1], cand[0])
            if rev in index_of and rev < cand:
                cand = rev
            pinned[index_of[cand]] = True

    removable = np.flatnonzero(~pinned)
    if n_test + n_val > len(removable):
        raise DataError(
            f"cannot hold out {n_test + n_val} edges without disconnecting the "
            f"training graph; at most {len(removable)} of {m} are removable"
        )
    test_idx = removable[:n_test]
    val_idx = removable[n_test : n_test + n_val]
    held = np.zeros(m, dtype=bool)
    held[test_idx] = True
    held[val_idx] = True

    test_pos = shuffled[test_idx]
    val_pos = shuffled[val_idx]
    train_pos = shuffled[~held]

    negs = sample_eval_negatives(g, n_test + n_val, neg_ss)
    return SplitBundle(
        train_pos=train_pos,
        val_pos=val_pos,
        test_pos=test_pos,
        val_neg=negs[n_test:],
        test_neg=negs[:n_test],
        seed=seed,
        train_graph=DirectedGraph(g.n, train_pos),
        ratios=tuple(ratios),
    )


def _sample_non_edges(n, count, excluded_keys, rng):
    """count distinct ordered pairs (u, v), u != v, whose key u*n+v is not excluded."""
    available = n * (n - 1) - len(excluded_keys)
    if count > available:
        raise DataError(f"requested {count} negatives but only {available} non-edges exist")
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    if count * 2 > available:
        # dense regime: enumerate the complement and draw without replacement
        all_keys = np.arange(n * n, dtype=np.int64)
        diag = np.arange(n, dtype=np.int64) * (n + 1)
        bad = np.union1d(excluded_keys, diag)
        pool = np.setdiff1d(all_keys, bad, assume_unique=True)
        chosen = rng.choice(pool, size=count, replace=False)
        return np.stack([chosen // n, chosen % n], axis=1)
    picked = []
    seen = set()
    while len(picked) < count:
        batch = max(2 * (count - len(picked)), 256)
        cand = rng.integers(0, n, size=(batch, 2), dtype=np.int64)
        cand = cand[cand[:, 0] != cand[:, 1]]
        keys = cand[:, 0] * n + cand[:, 1]
        fresh = ~np.isin(keys, excluded_keys)
        for key, pair in zip(keys[fresh], cand[fresh]):
            k = int(key)
            if k not in seen:
                seen.add(k)
                picked.append(pair)
                if len(picked) == count:
                    break
    return np.asarray(picked, dtype=np.int64)


def sample_eval_negatives(g_full, count, seed):
    """Uniform negative pairs sampled with the full graph visible.

    Excludes every edge of g_full and all self-loops; reverse directions of
    true edges remain eligible.  `seed` may be an int or a numpy SeedSequence.
    """
    rng = np.random.default_rng(seed)
    return _sample_non_edges(g_full.n, count, g_full.edge_keys(), rng)


def sample_train_negatives(train_graph, count, seed, strategy="per_run", epoch=0):
    """Training negatives: uniform pairs outside the TRAIN edge set only.

    Held-out positives are deliberately eligible; only the training graph is
    visible at sampling time.  per_run ignores the epoch; per_epoch derives
    an independent stream from (seed, epoch).
    """
    if strategy == "per_run":
        entropy = [int(seed)]
    elif strategy == "per_epoch":
        entropy = [int(seed), int(epoch)]
    else:
        raise ValueError(f"unknown negative sampling strategy {strategy!r}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    return _sample_non_edges(train_graph.n, count, train_graph.edge_keys(), rng)


def init_features(init, train_graph, original=None):
    """Materialize the feature matrix for one split.

    degrees mode returns exactly the two columns [out_deg, in_deg] of the
    training graph (no self-loops, no held-out information); random mode is
    seeded standard normal; original passes the dataset features through.
    """
    if init.mode == "original":
        if original is None:
            raise DataError("feature mode 'original' requires a feature matrix")
        feats = np.asarray(original, dtype=np.float64)
        if feats.shape[0] != train_graph.n:
            raise DataError(f"feature rows ({feats.shape[0]}) != node count ({train_graph.n})")
        return feats
    if init.mode == "degrees":
        out_deg, in_deg = degrees(train_graph, add_self_loops=False)
        return np.stack([out_deg, in_deg], axis=1).astype(np.float64)
    return np.random.default_rng(init.seed).standard_normal((train_graph.n, init.dim))


def save_split(directory, bundle):
    """Write one split as a directory of edge-list files plus a meta file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_edge_list(directory / "train.txt", bundle.train_pos)
    save_edge_list(directory / "val_pos.txt", bundle.val_pos)
    save_edge_list(directory / "val_neg.txt", bundle.val_neg)
    save_edge_list(directory / "test_pos.txt", bundle.test_pos)
    save_edge_list(directory / "test_neg.txt", bundle.test_neg)
    m = len(bundle.train_pos) + len(bundle.val_pos) + len(bundle.test_pos)
    with open(directory / "meta", "w", encoding="utf-8") as fh:
        fh.write(f"n = {bundle.train_graph.n}\n")
        fh.write(f"m = {m}\n")
        fh.write(f"seed = {bundle.seed}\n")
        fh.write(f"ratios = {','.join(repr(r) for r in bundle.ratios)}\n")


def _load_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = line.split()
            pairs.append((int(u), int(v)))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def load_split(directory):
    directory = Path(directory)
    meta = {}
    with open(directory / "meta", encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, val = line.split("=", 1)
                meta[key.strip()] = val.strip()
    n = int(meta["n"])
    train_pos = _load_pairs(directory / "train.txt")
    return SplitBundle(
        train_pos=train_pos,
        val_pos=_load_pairs(directory / "val_pos.txt"),
        test_pos=_load_pairs(directory / "test_pos.txt"),
        val_neg=_load_pairs(directory / "val_neg.txt"),
        test_neg=_load_pairs(directory / "test_neg.txt"),
        seed=int(meta["seed"]),
        train_graph=DirectedGraph(n, train_pos),
        ratios=tuple(float(r) for r in meta["ratios"].split(",")),
    )
