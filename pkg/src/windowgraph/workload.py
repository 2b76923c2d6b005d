"""Vector file I/O, attribute assignment, range workloads and LID estimation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import HybridDataset, RangeFilter, native_distance
from .oracle import brute_knn

log = logging.getLogger(__name__)

FRACTIONS = [2.0**-i for i in range(11)]

_COMPONENT = {"fvecs": np.dtype("<f4"), "ivecs": np.dtype("<i4"), "bvecs": np.dtype("u1")}


# ----------------------------------------------------------------- vecs I/O


def _format_of(path: Path, fmt: str | None) -> str:
    fmt = fmt or path.suffix.lstrip(".")
    if fmt not in _COMPONENT:
        raise ValueError(f"unknown vector format {fmt!r} (expected fvecs, ivecs or bvecs)")
    return fmt


def read_vectors(path: str | Path, fmt: str | None = None) -> np.ndarray:
    """Read a texmex container: per record a little-endian i32 dimension, then components."""
    path = Path(path)
    fmt = _format_of(path, fmt)
    comp = _COMPONENT[fmt]
    raw = path.read_bytes()
    if not raw:
        return np.empty((0, 0), dtype=comp)
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated dimension prefix at byte offset 0")
    dim = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise ValueError(f"{path}: invalid dimension {dim} at byte offset 0")
    rec = 4 + dim * comp.itemsize
    if len(raw) % rec:
        whole = len(raw) // rec
        raise ValueError(f"{path}: truncated record at byte offset {whole * rec}")
    n = len(raw) // rec
    table = np.frombuffer(raw, dtype=np.uint8).reshape(n, rec)
    dims = table[:, :4].copy().view("<i4").ravel()
    bad = np.flatnonzero(dims != dim)
    if len(bad):
        raise ValueError(
            f"{path}: inconsistent dimension {dims[bad[0]]} (expected {dim}) at byte offset {bad[0] * rec}"
        )
    return table[:, 4:].copy().view(comp).reshape(n, dim)


def write_vectors(path: str | Path, vectors: np.ndarray, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = _format_of(path, fmt)
    comp = _COMPONENT[fmt]
    vectors = np.asarray(vectors)
    if vectors.size == 0:
        path.write_bytes(b"")
        return
    n, dim = vectors.shape
    body = np.ascontiguousarray(vectors.astype(comp)).view(np.uint8).reshape(n, dim * comp.itemsize)
    prefix = np.full((n, 1), dim, dtype="<i4").view(np.uint8)
    path.write_bytes(np.hstack([prefix, body]).tobytes())


# -------------------------------------------------------------- attributes


def read_attributes(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=np.int64)


def write_attributes(path: str | Path, attrs: Sequence[int]) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(a)}\n" for a in attrs)


def assign_attributes(
    n: int,
    mode: str = "random-int",
    *,
    n_unique: int | None = None,
    seed: int = 0,
    path: str | Path | None = None,
) -> np.ndarray:
    """Attribute per vector.

    ``random-int`` draws from ``[1, n_unique]`` when given, otherwise a
    shuffled permutation of ``0..n-1``; ``sequential-id`` is ``0..n-1``;
    ``file`` reads one integer per line from ``path``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "sequential-id":
        return np.arange(n, dtype=np.int64)
    if mode == "random-int":
        rng = np.random.default_rng(seed)
        if n_unique is not None:
            if n_unique < 1:
                raise ValueError("n_unique must be >= 1")
            return rng.integers(1, n_unique + 1, size=n, dtype=np.int64)
        return rng.permutation(n).astype(np.int64)
    if mode == "file":
        if path is None:
            raise ValueError("file mode needs a path")
        attrs = read_attributes(path)
        if len(attrs) != n:
            raise ValueError(f"{path}: {len(attrs)} attributes for {n} vectors")
        return attrs
    raise ValueError(f"unknown attribute mode {mode!r}")


def rank_remap(values: Sequence) -> np.ndarray:
    """Replace each value by the position of its vector in a stable sort by value.

    Works for any totally ordered values (integers, floats, strings); the
    result is a permutation of ``0..n-1``.
    """
    values = list(values)
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    out = np.empty(len(values), dtype=np.int64)
    out[order] = np.arange(len(values))
    return out


def shuffle_pairs(vectors: np.ndarray, attrs: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(len(attrs))
    return vectors[perm], attrs[perm]


# ----------------------------------------------------------------- ranges


@dataclass
class RangeWorkload:
    queries: np.ndarray
    ranges: list[RangeFilter]
    fractions: list[float]
    seed: int = 0

    def __len__(self) -> int:
        return len(self.ranges)

    def buckets(self) -> dict[float, list[int]]:
        out: dict[float, list[int]] = {}
        for i, f in enumerate(self.fractions):
            out.setdefault(f, []).append(i)
        return dict(sorted(out.items(), reverse=True))

    def save(self, csv_path: str | Path, fvecs_path: str | Path) -> None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["qid", "x", "y", "fraction"])
            for i, (r, f) in enumerate(zip(self.ranges, self.fractions)):
                w.writerow([i, r.x, r.y, repr(float(f))])
        write_vectors(fvecs_path, self.queries, "fvecs")

    @classmethod
    def load(cls, csv_path: str | Path, fvecs_path: str | Path) -> "RangeWorkload":
        ranges, fractions = [], []
        with open(csv_path, newline="") as fh:
            for row in csv.DictReader(fh):
                ranges.append(RangeFilter(int(row["x"]), int(row["y"])))
                fractions.append(float(row["fraction"]))
        queries = read_vectors(fvecs_path, "fvecs").astype(np.float32)
        if len(queries) != len(ranges):
            raise ValueError(f"{len(queries)} query vectors for {len(ranges)} ranges")
        return cls(queries, ranges, fractions)


def in_range_count(attrs: np.ndarray, fraction: float) -> int:
    return int(np.floor(len(attrs) * fraction))


def gen_ranges(attrs: Sequence[int], fraction: float, count: int, seed: int = 0) -> list[RangeFilter]:
    """Ranges spanning exactly ``floor(n * fraction)`` positions of the sorted attributes."""
    attrs = np.sort(np.asarray(attrs, dtype=np.int64))
    n = len(attrs)
    width = in_range_count(attrs, fraction)
    if width < 1:
        raise ValueError(f"fraction {fraction} leaves no in-range vector for n={n}")
    if width > n:
        raise ValueError(f"fraction {fraction} exceeds the dataset")
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n - width + 1, size=count)
    return [RangeFilter(int(attrs[s]), int(attrs[s + width - 1])) for s in starts]


def gen_mixed(
    attrs: Sequence[int],
    count: int,
    seed: int = 0,
    queries: np.ndarray | None = None,
) -> RangeWorkload:
    """``count / 11`` ranges for each fraction ``2**0 .. 2**-10``, shuffled."""
    if count % len(FRACTIONS):
        raise ValueError(f"mixed workload size {count} is not divisible by {len(FRACTIONS)}")
    per = count // len(FRACTIONS)
    ranges: list[RangeFilter] = []
    fractions: list[float] = []
    for i, f in enumerate(FRACTIONS):
        ranges += gen_ranges(attrs, f, per, seed=seed * 1000 + i)
        fractions += [f] * per
    perm = np.random.default_rng(seed).permutation(count)
    ranges = [ranges[i] for i in perm]
    fractions = [fractions[i] for i in perm]
    if queries is None:
        queries = np.empty((count, 0), dtype=np.float32)
    return RangeWorkload(np.asarray(queries, dtype=np.float32), ranges, fractions, seed)


def gen_workload(
    attrs: Sequence[int],
    queries: np.ndarray,
    fractions: Sequence[float] | str,
    seed: int = 0,
) -> RangeWorkload:
    """Pair each query vector with a range; ``"mixed"`` or one fraction per bucket, equal shares."""
    count = len(queries)
    if fractions == "mixed":
        return gen_mixed(attrs, count, seed, queries)
    fractions = list(fractions)
    if count % len(fractions):
        raise ValueError(f"{count} queries cannot be split evenly over {len(fractions)} fractions")
    per = count // len(fractions)
    ranges: list[RangeFilter] = []
    realized: list[float] = []
    for i, f in enumerate(fractions):
        ranges += gen_ranges(attrs, f, per, seed=seed * 1000 + i)
        realized += [f] * per
    return RangeWorkload(np.asarray(queries, dtype=np.float32), ranges, realized, seed)


# -------------------------------------------------------------------- LID


@dataclass
class LidEstimate:
    value: float
    used: int
    excluded: list[int]


def lid_from_distances(dists: np.ndarray) -> float | None:
    """LID of one query from its ascending native top-k distances; None when degenerate."""
    d = np.asarray(dists, dtype=np.float64)
    if len(d) == 0 or d[0] <= 0.0:
        return None
    dk = d[-1]
    s = float(np.mean(np.log(d / dk)))
    if s == 0.0:
        return None
    return -1.0 / s


def lid_at_k(dataset: HybridDataset, workload: RangeWorkload, k: int) -> LidEstimate:
    """Mean LID@k over queries using exact in-range neighbors."""
    values, excluded = [], []
    for i, (q, r) in enumerate(zip(workload.queries, workload.ranges)):
        gold = brute_knn(dataset, q, r, k, wide=True)
        if len(gold.ids) < k:
            excluded.append(i)
            continue
        lid = lid_from_distances(native_distance(dataset.metric, gold.dists))
        if lid is None:
            excluded.append(i)
        else:
            values.append(lid)
    if not values:
        raise ValueError("every query was excluded from the LID estimate")
    if excluded:
        log.info("LID: excluded %d degenerate queries", len(excluded))
    return LidEstimate(float(np.mean(values)), len(values), excluded)
