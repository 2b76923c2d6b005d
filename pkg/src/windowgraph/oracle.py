"""Exact pre-filtering ground truth, recall, and edge diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .core import DistanceCounter, HybridDataset, Metric, RangeFilter


@dataclass
class GoldResult:
    query: int
    ids: np.ndarray
    dists: np.ndarray
    n_prime_total: int


def _distances(metric: Metric, vectors: np.ndarray, q: np.ndarray, wide: bool) -> np.ndarray:
    dtype = np.float64 if wide else np.float32
    v = vectors.astype(dtype, copy=False)
    q = np.asarray(q, dtype=dtype)
    if metric is Metric.L2:
        diff = v - q
        return np.einsum("ij,ij->i", diff, diff)
    dots = v @ q
    norms = np.sqrt(np.einsum("ij,ij->i", v, v) * np.dot(q, q))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(norms > 0, 1.0 - dots / norms, 1.0)
    return np.maximum(out, 0.0).astype(dtype)


def brute_knn(
    dataset: HybridDataset,
    q,
    r: RangeFilter,
    k: int,
    *,
    query: int = 0,
    counter: DistanceCounter | None = None,
    exclude: np.ndarray | None = None,
    wide: bool = False,
) -> GoldResult:
    """Exact top-``k`` in-range neighbors by linear scan, ties broken by id.

    ``exclude`` is a boolean mask of ids to ignore (e.g. soft-deleted).
    ``wide`` accumulates in float64 for tie auditing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    attrs = dataset.attributes
    mask = (attrs >= r.x) & (attrs <= r.y)
    if exclude is not None:
        mask &= ~exclude[: len(attrs)]
    ids = np.flatnonzero(mask)
    if counter is not None:
        counter.add(len(ids))
    if len(ids) == 0:
        return GoldResult(query, ids.astype(np.int64), np.empty(0, dtype=np.float32), 0)
    d = _distances(dataset.metric, dataset.vectors[ids], q, wide)
    order = np.lexsort((ids, d))[:k]
    return GoldResult(query, ids[order].astype(np.int64), d[order], len(ids))


def ground_truth(
    dataset: HybridDataset,
    queries: np.ndarray,
    ranges: Sequence[RangeFilter],
    k: int,
    exclude: np.ndarray | None = None,
) -> list[GoldResult]:
    return [
        brute_knn(dataset, q, r, k, query=i, exclude=exclude)
        for i, (q, r) in enumerate(zip(queries, ranges))
    ]


def recall(result: Iterable[int], gold: GoldResult, k: int) -> float:
    """Share of the exact top-``k`` found; the denominator is ``n'`` when ``n' < k``."""
    found = set(int(i) for i in result)
    denom = min(k, gold.n_prime_total)
    if denom == 0:
        return 1.0
    hits = len(found & set(gold.ids[:k].tolist()))
    return hits / denom


def write_ground_truth(path: str | Path, golds: Sequence[GoldResult]) -> None:
    """CSV: ``qid,n_prime_total,ids`` with ids space-separated."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["qid", "n_prime_total", "ids"])
        for g in golds:
            w.writerow([g.query, g.n_prime_total, " ".join(str(int(i)) for i in g.ids)])


def read_ground_truth(path: str | Path) -> list[GoldResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ids = np.array([int(t) for t in row["ids"].split()], dtype=np.int64)
            out.append(GoldResult(int(row["qid"]), ids, np.full(len(ids), np.nan), int(row["n_prime_total"])))
    return out


# ------------------------------------------------------------ edge quality


def edge_quality(index, full_only: bool = True) -> dict:
    """Window-violation and local-domination rates over the stored edges.

    With ``full_only`` the window check covers only lists filled to ``m``.
    Domination is counted over every list: an edge ``base -> c`` is dominated
    when another neighbor ``u`` of ``base`` is closer to ``base`` and
    ``dist(u, c) < dist(base, c)``.
    """
    m = index.params.m
    metric = int(index.params.metric)
    vecs = index.vectors
    attrs = index.attributes
    win_edges = win_bad = 0
    dom_edges = dom_bad = 0
    for layer in range(index.top + 1 if index.n else 0):
        half = index.half_window(layer)
        for vid in range(index.n):
            nb = index.neighbors(layer, vid)
            if len(nb) == 0:
                continue
            if not full_only or len(nb) == m:
                w = index.tree.get_window(int(attrs[vid]), half)
                a = attrs[nb]
                win_edges += len(nb)
                win_bad += int(np.count_nonzero((a < w.w_min) | (a > w.w_max)))
            d = K.dist_to_many(vecs, nb.astype(np.int64), vecs[vid], metric)
            pair = np.array([K.dist_to_many(vecs, nb.astype(np.int64), vecs[c], metric) for c in nb])
            closer = d[:, None] < d[None, :]
            dominated = (closer & (pair < d[None, :])).any(axis=0)
            dom_edges += len(nb)
            dom_bad += int(np.count_nonzero(dominated))
    return {
        "window_violation_rate": win_bad / win_edges if win_edges else 0.0,
        "domination_rate": dom_bad / dom_edges if dom_edges else 0.0,
        "window_edges": win_edges,
        "edges": dom_edges,
    }
