"""Hierarchical window-graph index for range-filtered nearest neighbor search.

Layer ``l`` is a proximity graph in which every edge joins attribute values
at most ``o**l`` unique ranks apart.  Inserts walk the layers top-down,
collecting candidates by beam search inside the new vertex's window; queries
land on the layer whose window best matches the number of in-range values.
"""

from __future__ import annotations

import logging
import math
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import _kernels as K
from .attr_tree import AttributeTree, Window
from .core import DistanceCounter, HybridDataset, Metric, RangeFilter

log = logging.getLogger(__name__)

MAGIC = b"WOW1"
VERSION = 1
_HEADER = struct.Struct("<IIQBHHIHQ")
_N_LOCKS = 1024
_MASK64 = (1 << 64) - 1


class IndexFormatError(ValueError):
    """Index file is corrupt or does not match the supplied data."""


@dataclass(frozen=True)
class IndexParams:
    m: int = 16
    omega_c: int = 128
    o: int = 4
    metric: Metric = Metric.L2
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        if self.m < 2 or self.m % 2 or self.m > 255:
            raise ValueError(f"m must be even and in [2, 255], got {self.m}")
        if self.omega_c < self.m:
            raise ValueError(f"omega_c ({self.omega_c}) must be >= m ({self.m})")
        if self.o < 2:
            raise ValueError(f"window boosting base o must be >= 2, got {self.o}")


@dataclass
class SearchStats:
    """Per-query measurements filled in by :meth:`WindowGraphIndex.search_knn`."""

    dc: int = 0
    hops: int = 0
    n_unique: int = 0
    landing_layer: int = -1
    lowest_layers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int32))
    landing_fraction_sum: float = 0.0
    landing_fraction_hops: int = 0

    @property
    def landing_fraction(self) -> float:
        if self.landing_fraction_hops == 0:
            return float("nan")
        return self.landing_fraction_sum / self.landing_fraction_hops


# ----------------------------------------------------------------- formulas


def top_for(unique: int, o: int) -> int:
    """Smallest ``t >= 0`` with ``2 * o**t >= unique``, i.e. ``ceil(log_o(unique / 2))``."""
    t = 0
    while 2 * o**t < unique:
        t += 1
    return t


def landing_layer(n_unique: int, o: int, top: int) -> int:
    """Layer whose window size ``2*o**l`` best matches ``n_unique`` in-range values."""
    if n_unique < 1:
        raise ValueError("landing layer needs at least one in-range value")
    lh = 0
    while 2 * o ** (lh + 1) <= n_unique:
        lh += 1
    lh = min(max(lh, 0), top)
    best, best_num, best_den = lh, 0, 1
    for layer in (lh, min(lh + 1, top)):
        size = 2 * o**layer
        num, den = min(size, n_unique), max(size, n_unique)
        if num * best_den > best_num * den:
            best, best_num, best_den = layer, num, den
    return best


def fraction_bounds(o: int, l: int, n_prime: int) -> tuple[float, float]:
    """Bounds on the expected in-range neighbor fraction per hop at the landing layer.

    ``l`` must equal ``floor(log_o(n_prime / 2))``.
    """
    return _fraction_bounds(o, l, n_prime)[1:]


def fraction_case(o: int, l: int, n_prime: int) -> str:
    return _fraction_bounds(o, l, n_prime)[0]


def _fraction_bounds(o: int, l: int, n_prime: int) -> tuple[str, float, float]:
    if o < 2 or l < 0 or n_prime < 2:
        raise ValueError(f"need o >= 2, l >= 0, n' >= 2 (got o={o}, l={l}, n'={n_prime})")
    if not (2 * o**l <= n_prime < 2 * o ** (l + 1)):
        raise ValueError(f"l={l} is not floor(log_{o}({n_prime}/2))")
    # n' <= 2 o^(l + 1/2)  <=>  n'^2 <= 4 o^(2l + 1)
    if n_prime * n_prime <= 4 * o ** (2 * l + 1):
        ol = float(o**l)
        return "c", 0.75 - 1.0 / (4.0 * ol), 1.0 - (ol + 1.0) / (4.0 * ol * math.sqrt(o))
    if o > 4:
        return "a", 1.0 / math.sqrt(o), 0.5
    ol1 = float(o ** (l + 1))
    return "b", math.sqrt(2.0) / 2.0 - 1.0 / (4.0 * ol1), 0.75 - 1.0 / (4.0 * ol1)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


# ------------------------------------------------------------------- index


class _Context(threading.local):
    def __init__(self) -> None:
        self.visited = np.zeros(0, dtype=np.uint32)
        self.epoch = 0

    def next_epoch(self, cap: int) -> int:
        if self.visited.shape[0] < cap:
            self.visited = np.zeros(cap, dtype=np.uint32)
            self.epoch = 0
        self.epoch += 1
        if self.epoch >= 2**32:
            self.visited[:] = 0
            self.epoch = 1
        return self.epoch


class WindowGraphIndex:
    """Incremental range-filtered ANN index over hierarchical window graphs.

    ``rng_pruning=False`` replaces RNG selection by plain nearest selection and
    ``exhaustive_candidates=True`` feeds every in-window vertex to selection
    instead of beam-search candidates; both exist for structural experiments.
    ``record_selections`` keeps ``(vid, layer, ids, dists)`` for every
    neighbor selection made at insert time.
    """

    def __init__(
        self,
        dim: int,
        params: IndexParams | None = None,
        *,
        rng_pruning: bool = True,
        exhaustive_candidates: bool = False,
        record_selections: bool = False,
    ) -> None:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.params = params or IndexParams()
        self.rng_pruning = rng_pruning
        self.exhaustive_candidates = exhaustive_candidates
        self.selections: list[tuple[int, int, np.ndarray, np.ndarray]] | None = (
            [] if record_selections else None
        )
        self.tree = AttributeTree()
        self.top = 0
        self.n = 0
        self._cap = 0
        m = self.params.m
        self._vecs = np.empty((0, dim), dtype=np.float32)
        self._attrs = np.empty(0, dtype=np.int64)
        self._deleted = np.zeros(0, dtype=np.uint8)
        self._published = np.zeros(0, dtype=np.uint8)
        self._nbrs = np.empty((1, 0, m), dtype=np.int32)
        self._deg = np.zeros((1, 0), dtype=np.int32)
        self._by_value: dict[int, list[int]] = {}
        self._tree_lock = threading.RLock()
        self._alloc_lock = threading.Lock()
        self._locks = [threading.Lock() for _ in range(_N_LOCKS)]
        self._ctx = _Context()

    # ---------------------------------------------------------- properties

    @property
    def metric(self) -> Metric:
        return self.params.metric

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs[: self.n]

    @property
    def attributes(self) -> np.ndarray:
        return self._attrs[: self.n]

    @property
    def deleted(self) -> np.ndarray:
        return self._deleted[: self.n].astype(bool)

    @property
    def num_layers(self) -> int:
        return self.top + 1

    def dataset(self) -> HybridDataset:
        return HybridDataset.from_arrays(self.vectors, self.attributes, self.metric)

    def __len__(self) -> int:
        return self.n

    def neighbors(self, layer: int, vid: int) -> np.ndarray:
        """Copy of ``vid``'s neighbor list at ``layer``."""
        if not 0 <= vid < self.n:
            raise IndexError(f"vector id {vid} out of range")
        if not 0 <= layer <= self.top:
            raise IndexError(f"layer {layer} out of range [0, {self.top}]")
        return self._nbrs[layer, vid, : self._deg[layer, vid]].copy()

    def half_window(self, layer: int) -> int:
        return self.params.o**layer

    def window(self, vid: int, layer: int) -> Window:
        with self._tree_lock:
            return self.tree.get_window(int(self._attrs[vid]), self.half_window(layer))

    # -------------------------------------------------------------- storage

    def reserve(self, capacity: int) -> None:
        """Grow storage for ``capacity`` vectors.  Not safe during parallel inserts."""
        layers = top_for(capacity, self.params.o) + 1
        if capacity <= self._cap and layers <= self._nbrs.shape[0]:
            return
        cap = max(capacity, self._cap)
        layers = max(layers, self._nbrs.shape[0], self.top + 1)
        m = self.params.m
        vecs = np.zeros((cap, self.dim), dtype=np.float32)
        vecs[: self.n] = self._vecs[: self.n]
        attrs = np.zeros(cap, dtype=np.int64)
        attrs[: self.n] = self._attrs[: self.n]
        deleted = np.zeros(cap, dtype=np.uint8)
        deleted[: self.n] = self._deleted[: self.n]
        published = np.zeros(cap, dtype=np.uint8)
        published[: self.n] = self._published[: self.n]
        nbrs = np.full((layers, cap, m), -1, dtype=np.int32)
        deg = np.zeros((layers, cap), dtype=np.int32)
        old_layers = self._nbrs.shape[0]
        nbrs[:old_layers, : self.n] = self._nbrs[:, : self.n]
        deg[:old_layers, : self.n] = self._deg[:, : self.n]
        self._vecs, self._attrs, self._deleted, self._published = vecs, attrs, deleted, published
        self._nbrs, self._deg = nbrs, deg
        self._cap = cap

    def _allocate(self, vectors: np.ndarray, attrs: np.ndarray) -> range:
        with self._alloc_lock:
            start = self.n
            need = start + len(vectors)
            if need > self._cap:
                self.reserve(max(need, 2 * self._cap, 16))
            self._vecs[start:need] = vectors
            self._attrs[start:need] = attrs
            self.n = need
            return range(start, need)

    # --------------------------------------------------------------- insert

    def insert(self, vector, attribute: int) -> int:
        """Insert one vector-attribute pair; returns its id."""
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dim,):
            raise ValueError(f"expected vector of dimension {self.dim}, got {vector.shape}")
        (vid,) = self._allocate(vector[None, :], np.array([attribute], dtype=np.int64))
        self._insert_vertex(vid)
        return vid

    def insert_many(self, vectors, attributes, threads: int = 1) -> range:
        """Insert pairs in order; ``threads > 1`` inserts concurrently."""
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        attributes = np.asarray(attributes, dtype=np.int64)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) vectors, got {vectors.shape}")
        if len(vectors) != len(attributes):
            raise ValueError(f"{len(vectors)} vectors but {len(attributes)} attributes")
        self.reserve(self.n + len(vectors))
        ids = self._allocate(vectors, attributes)
        if threads <= 1:
            for vid in ids:
                self._insert_vertex(vid)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for _ in pool.map(self._insert_vertex, ids, chunksize=64):
                    pass
        return ids

    def _raise_top(self) -> None:
        # every stripe lock is taken so the clone sees whole neighbor lists
        for lock in self._locks:
            lock.acquire()
        try:
            new = self.top + 1
            if new >= self._nbrs.shape[0]:
                grow = np.full((1, self._cap, self.params.m), -1, dtype=np.int32)
                self._nbrs = np.concatenate([self._nbrs, grow])
                self._deg = np.concatenate([self._deg, np.zeros((1, self._cap), dtype=np.int32)])
            self._nbrs[new, : self.n] = self._nbrs[self.top, : self.n]
            self._deg[new, : self.n] = self._deg[self.top, : self.n]
            self.top = new
        finally:
            for lock in self._locks:
                lock.release()

    def _insert_vertex(self, vid: int) -> None:
        p = self.params
        a = int(self._attrs[vid])
        with self._tree_lock:
            self.tree.insert(a)
            while self.tree.unique_count > 2 * p.o**self.top:
                self._raise_top()
            top = self.top
            windows = [self.tree.get_window(a, p.o**l) for l in range(top + 1)]

        vec = self._vecs[vid]
        prev_ids = np.empty(0, dtype=np.int64)
        prev_d = np.empty(0, dtype=np.float32)
        for l in range(top, -1, -1):
            w = windows[l]
            if self.exhaustive_candidates:
                cand_ids, cand_d = self._window_members(w, vid)
            else:
                pa = self._attrs[prev_ids]
                keep = (pa >= w.w_min) & (pa <= w.w_max)
                cand_ids, cand_d = prev_ids[keep], prev_d[keep]
                if len(cand_ids) <= p.m:
                    ep = self._random_entry(w, vid, l)
                    if ep >= 0:
                        epoch = self._ctx.next_epoch(self._cap)
                        ids, ds, *_ = K.search_candidates(
                            self._vecs, self._attrs, self._deleted, self._nbrs, self._deg,
                            int(p.metric), p.m, ep, vec, w.w_min, w.w_max, l, top,
                            p.omega_c, self._ctx.visited, epoch, True, vid,
                        )
                        if len(cand_ids):
                            ids = np.concatenate([cand_ids, ids])
                            ds = np.concatenate([cand_d, ds])
                            ids, first = np.unique(ids, return_index=True)
                            ds = ds[first]
                        cand_ids, cand_d = ids, ds
            selected = K.rng_prune(self._vecs, int(p.metric), vid, cand_ids, cand_d, p.m // 2, self.rng_pruning)
            if self.selections is not None:
                sel_d = K.dist_to_many(self._vecs, selected, vec, int(p.metric))
                self.selections.append((vid, l, selected, sel_d))
            self._write_row(l, vid, selected)
            for b in selected:
                self._link(l, int(b), vid)
            prev_ids, prev_d = cand_ids, cand_d

        with self._tree_lock:
            self._by_value.setdefault(a, []).append(vid)
            self._published[vid] = 1

    def _write_row(self, layer: int, vid: int, selected: np.ndarray) -> None:
        # other threads may already have appended reverse edges to this row
        m = self.params.m
        with self._locks[vid % _N_LOCKS]:
            cnt = int(self._deg[layer, vid])
            if cnt:
                have = self._nbrs[layer, vid, :cnt].astype(np.int64)
                merged = np.concatenate([selected, have[~np.isin(have, selected)]])
                if len(merged) > m:
                    ds = K.dist_to_many(self._vecs, merged, self._vecs[vid], int(self.params.metric))
                    merged = K.rng_prune(self._vecs, int(self.params.metric), vid, merged, ds, m, self.rng_pruning)
                selected = merged
            k = len(selected)
            self._nbrs[layer, vid, :k] = selected
            self._deg[layer, vid] = k

    def _link(self, layer: int, b: int, vid: int) -> None:
        lock = self._locks[b % _N_LOCKS]
        with lock:
            if K.append_neighbor(self._nbrs, self._deg, self.params.m, layer, b, vid):
                return
        w = self.window(b, layer)
        with lock:
            if K.append_neighbor(self._nbrs, self._deg, self.params.m, layer, b, vid):
                return
            K.reprune(
                self._vecs, self._attrs, self._deleted, self._nbrs, self._deg,
                int(self.params.metric), self.params.m, layer, b, vid,
                w.w_min, w.w_max, self.rng_pruning,
            )

    def _window_members(self, w: Window, vid: int) -> tuple[np.ndarray, np.ndarray]:
        a = self._attrs[: self.n]
        mask = (a >= w.w_min) & (a <= w.w_max) & (self._published[: self.n] == 1)
        mask &= self._deleted[: self.n] == 0
        ids = np.flatnonzero(mask).astype(np.int64)
        ids = ids[ids != vid]
        ds = K.dist_to_many(self._vecs, ids, self._vecs[vid], int(self.params.metric))
        return ids, ds

    def _live_at(self, value: int, salt: int) -> int:
        ids = self._by_value.get(value)
        if not ids:
            return -1
        start = salt % len(ids)
        for j in range(len(ids)):
            vid = ids[(start + j) % len(ids)]
            if not self._deleted[vid]:
                return vid
        return -1

    def _scan_out(self, lo: int, hi: int, center: int, salt: int) -> int:
        # alternate center, center+1, center-1, ... inside [lo, hi]
        for step in range(2 * (hi - lo) + 1):
            off = (step + 1) // 2
            r = center + off if step % 2 else center - off
            if lo <= r <= hi:
                vid = self._live_at(self.tree.select(r), salt)
                if vid >= 0:
                    return vid
            elif center + off > hi and center - off < lo:
                break
        return -1

    def _random_entry(self, w: Window, vid: int, layer: int) -> int:
        with self._tree_lock:
            span = self.tree.rank_span(w.w_min, w.w_max)
            if span is None:
                return -1
            lo, hi = span
            h = _splitmix64(self.params.seed * 0x100000001B3 ^ (vid << 8) ^ layer)
            return self._scan_out(lo, hi, lo + h % (hi - lo + 1), h >> 32)

    # --------------------------------------------------------------- search

    def entry_for(self, r: RangeFilter) -> int:
        """Live vertex whose attribute rank is closest to the median rank of ``r``; -1 if none."""
        with self._tree_lock:
            span = self.tree.rank_span(r.x, r.y)
            if span is None:
                return -1
            lo, hi = span
            return self._scan_out(lo, hi, (lo + hi) // 2, 0)

    def search_candidates(
        self,
        ep: int,
        target,
        r: RangeFilter,
        layers: tuple[int, int],
        omega: int,
        *,
        early_stop: bool = True,
        counter: DistanceCounter | None = None,
        stats: SearchStats | None = None,
    ) -> list[tuple[int, float]]:
        """Beam search from ``ep`` over layers ``[l_min, l_max]`` keeping in-range results."""
        if not 0 <= ep < self.n:
            raise IndexError(f"entry {ep} out of range")
        if self._deleted[ep]:
            raise ValueError(f"entry {ep} is deleted")
        if not r.x <= self._attrs[ep] <= r.y:
            raise ValueError(f"entry {ep} attribute {self._attrs[ep]} not in [{r.x}, {r.y}]")
        lmin, lmax = layers
        if not 0 <= lmin <= lmax <= self.top:
            raise ValueError(f"layer range [{lmin}, {lmax}] outside [0, {self.top}]")
        if omega < 1:
            raise ValueError("beam width must be >= 1")
        target = np.asarray(target, dtype=np.float32)
        if target.shape != (self.dim,):
            raise ValueError(f"expected vector of dimension {self.dim}, got {target.shape}")
        epoch = self._ctx.next_epoch(self._cap)
        ids, ds, dc, hops, lows, fsum, fhops = K.search_candidates(
            self._vecs, self._attrs, self._deleted, self._nbrs, self._deg,
            int(self.params.metric), self.params.m, ep, target, r.x, r.y, lmin, lmax,
            omega, self._ctx.visited, epoch, early_stop, -1,
        )
        if counter is not None:
            counter.add(int(dc))
        if stats is not None:
            stats.dc += int(dc)
            stats.hops += int(hops)
            stats.lowest_layers = lows
            stats.landing_fraction_sum += fsum
            stats.landing_fraction_hops += int(fhops)
        return [(int(i), float(d)) for i, d in zip(ids, ds)]

    def search_knn(
        self,
        q,
        r: RangeFilter,
        k: int,
        omega_s: int,
        *,
        early_stop: bool = True,
        landing: int | None = None,
        counter: DistanceCounter | None = None,
        stats: SearchStats | None = None,
    ) -> list[tuple[int, float]]:
        """Up to ``k`` nearest in-range, non-deleted vectors as ``(id, distance)``.

        ``landing`` forces the top layer scanned (clamped to the index top).
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if omega_s < k:
            raise ValueError(f"omega_s ({omega_s}) must be >= k ({k})")
        with self._tree_lock:
            n_unique = self.tree.filtered_cardinality(r.x, r.y).unique
        if stats is not None:
            stats.n_unique = n_unique
        if n_unique == 0:
            return []
        ep = self.entry_for(r)
        if ep < 0:
            return []
        top = self.top
        ld = landing_layer(n_unique, self.params.o, top) if landing is None else min(max(landing, 0), top)
        if stats is not None:
            stats.landing_layer = ld
        found = self.search_candidates(
            ep, q, r, (0, ld), omega_s, early_stop=early_stop, counter=counter, stats=stats
        )
        return found[:k]

    def soft_delete(self, vid: int) -> bool:
        if not 0 <= vid < self.n:
            raise IndexError(f"vector id {vid} out of range")
        if self._deleted[vid]:
            return False
        self._deleted[vid] = 1
        return True

    # ------------------------------------------------------------ structure

    def structural_stats(self) -> dict:
        per_layer = [int(self._deg[l, : self.n].sum()) for l in range(self.top + 1)] if self.n else []
        total = sum(per_layer)
        slots = self.n * (self.top + 1)
        return {
            "n": self.n,
            "top": self.top if self.n else 0,
            "edges_per_layer": per_layer,
            "total_edges": total,
            "mean_outdegree": total / slots if slots else 0.0,
            "serialized_size": self.serialized_size() if self.n else 0,
        }

    def space_bound(self) -> int:
        """``n * sum_{l=0}^{top} min(2*o**l, m)`` neighbor slots."""
        o, m = self.params.o, self.params.m
        return self.n * sum(min(2 * o**l, m) for l in range(self.top + 1))

    def serialized_size(self) -> int:
        tree_bytes = 8 + 12 * self.tree.unique_count
        layers = (self.top + 1) * self.n + 4 * int(self._deg[: self.top + 1, : self.n].sum())
        return 4 + _HEADER.size + tree_bytes + layers + (self.n + 7) // 8

    # ---------------------------------------------------------- persistence

    def to_bytes(self) -> bytes:
        p = self.params
        parts = [
            MAGIC,
            _HEADER.pack(VERSION, self.dim, self.n, int(p.metric), p.o, p.m, p.omega_c, self.top, p.seed),
            self.tree.to_bytes(),
        ]
        for l in range(self.top + 1):
            parts.append(_encode_layer(self._nbrs[l, : self.n], self._deg[l, : self.n]))
        parts.append(np.packbits(self._deleted[: self.n], bitorder="little").tobytes())
        return b"".join(parts)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path, vectors, attributes) -> "WindowGraphIndex":
        return cls.from_bytes(Path(path).read_bytes(), vectors, attributes)

    @classmethod
    def from_bytes(cls, buf: bytes, vectors, attributes) -> "WindowGraphIndex":
        """Rebuild an index from :meth:`to_bytes` output plus the raw vectors and attributes."""
        if buf[:4] != MAGIC:
            raise IndexFormatError("bad magic: expected WOW1")
        if len(buf) < 4 + _HEADER.size:
            raise IndexFormatError("truncated header")
        version, d, n, metric, o, m, omega_c, top, seed = _HEADER.unpack_from(buf, 4)
        if version != VERSION:
            raise IndexFormatError(f"header field version: unsupported {version}")
        if metric not in (0, 1):
            raise IndexFormatError(f"header field metric: invalid tag {metric}")
        if o < 2:
            raise IndexFormatError(f"header field o: {o} < 2")
        if m < 2 or m % 2:
            raise IndexFormatError(f"header field m: {m} not even >= 2")
        if omega_c < m:
            raise IndexFormatError(f"header field omega_c: {omega_c} < m")
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.size == 0:
            vectors = vectors.reshape(0, d)
        attributes = np.asarray(attributes, dtype=np.int64)
        if vectors.shape[1] != d:
            raise IndexFormatError(f"header field d: {d} != vector dimension {vectors.shape[1]}")
        if len(vectors) != n or len(attributes) != n:
            raise IndexFormatError(
                f"header field n: {n} != {len(vectors)} vectors / {len(attributes)} attributes"
            )
        params = IndexParams(m=m, omega_c=omega_c, o=o, metric=Metric(metric), seed=seed)
        index = cls(d, params)
        try:
            tree, off = AttributeTree.from_bytes(buf, 4 + _HEADER.size)
        except ValueError as exc:
            raise IndexFormatError(f"attribute tree: {exc}") from None
        expected_top = top_for(tree.unique_count, o)
        if n and top != expected_top:
            raise IndexFormatError(f"header field top: {top} != {expected_top} for {tree.unique_count} unique values")
        index.reserve(n)
        if index._nbrs.shape[0] < top + 1:
            index._nbrs = np.full((top + 1, index._cap, m), -1, dtype=np.int32)
            index._deg = np.zeros((top + 1, index._cap), dtype=np.int32)
        index._allocate(vectors, attributes)
        index.tree = tree
        index.top = top if n else 0
        data = np.frombuffer(buf, dtype=np.uint8)
        for l in range(top + 1 if n else 0):
            off = _decode_layer(data, off, n, m, index._nbrs[l], index._deg[l], l)
        nbytes = (n + 7) // 8
        if len(buf) - off != nbytes:
            raise IndexFormatError(f"tombstone bitmap: expected {nbytes} bytes, found {len(buf) - off}")
        bits = np.unpackbits(data[off:], bitorder="little")[:n]
        index._deleted[:n] = bits
        index._published[:n] = 1
        for vid, a in enumerate(attributes.tolist()):
            index._by_value.setdefault(a, []).append(vid)
        return index


def _encode_layer(nbrs: np.ndarray, deg: np.ndarray) -> bytes:
    n = len(deg)
    if n == 0:
        return b""
    deg = deg.astype(np.int64)
    sizes = 1 + 4 * deg
    start = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    buf = np.zeros(int(sizes.sum()), dtype=np.uint8)
    buf[start] = deg.astype(np.uint8)
    valid = np.arange(nbrs.shape[1])[None, :] < deg[:, None]
    flat = nbrs[valid].astype("<u4")
    if len(flat):
        within = np.arange(len(flat)) - np.repeat(np.cumsum(deg) - deg, deg)
        pos = np.repeat(start + 1, deg) + 4 * within
        buf[pos[:, None] + np.arange(4)[None, :]] = flat.view(np.uint8).reshape(-1, 4)
    return buf.tobytes()


@njit(cache=True)
def _decode_kernel(data, off, n, m, nbrs, deg):
    for v in range(n):
        if off >= data.shape[0]:
            return -1, v
        d = data[off]
        off += 1
        if d > m:
            return -2, v
        if off + 4 * d > data.shape[0]:
            return -1, v
        for j in range(d):
            x = (
                np.int64(data[off])
                | (np.int64(data[off + 1]) << 8)
                | (np.int64(data[off + 2]) << 16)
                | (np.int64(data[off + 3]) << 24)
            )
            # ids >= 2**31 wrap negative and are reported by the verifier
            nbrs[v, j] = np.int32(x if x < 2**31 else x - 2**32)
            off += 4
        deg[v] = d
    return off, n


def _decode_layer(data, off, n, m, nbrs, deg, layer) -> int:
    end, v = _decode_kernel(data, off, n, m, nbrs, deg)
    if end == -1:
        raise IndexFormatError(f"layer {layer}: truncated at vertex {v}")
    if end == -2:
        raise IndexFormatError(f"layer {layer}: degree of vertex {v} exceeds m={m}")
    return int(end)
