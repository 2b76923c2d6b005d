"""Beam-width sweeps measuring Recall@k, QPS and distance computations."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .index import SearchStats, WindowGraphIndex
from .oracle import GoldResult, recall
from .workload import RangeWorkload

CSV_HEADER = ["tag", "fraction", "omega_s", "recall", "qps", "dc", "hops"]


@dataclass(frozen=True)
class BenchRecord:
    tag: str
    fraction: float
    omega_s: int
    recall: float
    qps: float
    dc: float
    hops: float


@dataclass(frozen=True)
class Ablation:
    early_stop: bool = True
    landing: int | None = None  # None = selectivity-aware choice


def _run_queries(index, workload, ids, k, omega_s, ablation):
    results, dcs, hops = [], [], []
    t0 = time.perf_counter()
    for i in ids:
        st = SearchStats()
        found = index.search_knn(
            workload.queries[i], workload.ranges[i], k, omega_s,
            early_stop=ablation.early_stop, landing=ablation.landing, stats=st,
        )
        results.append([vid for vid, _ in found])
        dcs.append(st.dc)
        hops.append(st.hops)
    elapsed = time.perf_counter() - t0
    return results, dcs, hops, elapsed


def run_sweep(
    index: WindowGraphIndex,
    workload: RangeWorkload,
    gold: Sequence[GoldResult],
    k: int,
    omegas: Sequence[int],
    *,
    ablation: Ablation = Ablation(),
    tag: str = "wow",
    per_bucket: bool = True,
    warmup: bool = True,
) -> list[BenchRecord]:
    """One record per (fraction bucket, omega_s); single-threaded timing.

    Each point runs the bucket once untimed, then once timed.
    """
    if len(gold) != len(workload):
        raise ValueError(f"{len(gold)} ground-truth rows for {len(workload)} queries")
    for w in omegas:
        if w < k:
            raise ValueError(f"omega_s ({w}) must be >= k ({k})")
    if per_bucket:
        buckets = workload.buckets()
    else:
        buckets = {float("nan"): list(range(len(workload)))}
    records = []
    for fraction, ids in buckets.items():
        for w in omegas:
            if warmup:
                _run_queries(index, workload, ids, k, w, ablation)
            results, dcs, hops, elapsed = _run_queries(index, workload, ids, k, w, ablation)
            rec = float(np.mean([recall(res, gold[i], k) for res, i in zip(results, ids)]))
            records.append(
                BenchRecord(
                    tag=tag,
                    fraction=fraction,
                    omega_s=w,
                    recall=rec,
                    qps=len(ids) / elapsed if elapsed > 0 else float("inf"),
                    dc=sum(dcs) / len(ids),
                    hops=sum(hops) / len(ids),
                )
            )
    return records


def emit_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.tag, f"{r.fraction:.6f}", r.omega_s, f"{r.recall:.6f}", f"{r.qps:.6f}", f"{r.dc:.6f}", f"{r.hops:.6f}"])


def read_csv(path: str | Path) -> list[BenchRecord]:
    with open(path, newline="") as fh:
        return [
            BenchRecord(
                row["tag"], float(row["fraction"]), int(row["omega_s"]), float(row["recall"]),
                float(row["qps"]), float(row["dc"]), float(row["hops"]),
            )
            for row in csv.DictReader(fh)
        ]


def best_dc_at_recall(records: Sequence[BenchRecord], target: float) -> float | None:
    """Smallest mean DC among sweep points reaching ``target`` recall."""
    hits = [r.dc for r in records if r.recall >= target]
    return min(hits) if hits else None


def dc_at_recall(records: Sequence[BenchRecord], target: float) -> float | None:
    """Mean DC at exactly ``target`` recall, interpolated along the omega_s sweep.

    Uses the first sweep point reaching ``target`` and the point before it;
    returns that point's DC unchanged when it is the first of the sweep.
    """
    pts = sorted(records, key=lambda r: r.omega_s)
    for i, r in enumerate(pts):
        if r.recall >= target:
            if i == 0:
                return r.dc
            p = pts[i - 1]
            if r.recall == p.recall:
                return r.dc
            t = (target - p.recall) / (r.recall - p.recall)
            return p.dc + t * (r.dc - p.dc)
    return None


def layer_footprint_trace(
    index: WindowGraphIndex, q, r, k: int, omega_s: int, *, ablation: Ablation = Ablation()
) -> list[tuple[int, int]]:
    """Per hop ``(lowest layer scanned, highest layer scanned)`` for one query."""
    st = SearchStats()
    index.search_knn(q, r, k, omega_s, early_stop=ablation.early_stop, landing=ablation.landing, stats=st)
    if st.landing_layer < 0:
        return []
    return [(int(lo), st.landing_layer) for lo in st.lowest_layers]


def write_trace(path: str | Path, traces: Sequence[Sequence[tuple[int, int]]]) -> None:
    """JSON lines: ``{"qid": i, "hops": [[l_min, l_max], ...]}``."""
    with open(path, "w") as fh:
        for i, hops in enumerate(traces):
            fh.write(json.dumps({"qid": i, "hops": [list(h) for h in hops]}) + "\n")


def records_as_dicts(records: Sequence[BenchRecord]) -> list[dict]:
    return [asdict(r) for r in records]
