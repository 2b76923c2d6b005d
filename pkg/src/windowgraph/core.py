"""Dataset model, metrics and distance counting shared by every module."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Metric(enum.IntEnum):
    """Distance metric tag.

    ``L2`` distances are *squared* Euclidean: ordering is identical to plain
    Euclidean and the square root is skipped.  ``COSINE`` is ``1 - cos``.
    """

    L2 = 0
    COSINE = 1

    @classmethod
    def parse(cls, value: "Metric | str | int") -> "Metric":
        if isinstance(value, Metric):
            return value
        if isinstance(value, str):
            try:
                return {"l2": cls.L2, "euclidean": cls.L2, "cosine": cls.COSINE}[value.lower()]
            except KeyError:
                raise ValueError(f"unknown metric {value!r}") from None
        return cls(int(value))

    @property
    def label(self) -> str:
        return "l2" if self is Metric.L2 else "cosine"


@dataclass(frozen=True)
class RangeFilter:
    """Closed attribute interval ``[x, y]``."""

    x: int
    y: int

    def __post_init__(self) -> None:
        if self.x > self.y:
            raise ValueError(f"range filter needs x <= y, got [{self.x}, {self.y}]")

    def __contains__(self, a: int) -> bool:
        return self.x <= a <= self.y


def in_range(a: int, r: RangeFilter) -> bool:
    return r.x <= a <= r.y


@dataclass
class DistanceCounter:
    """Number of distance evaluations; one per search context, never shared."""

    count: int = 0

    def add(self, n: int = 1) -> None:
        self.count += n

    def reset(self) -> None:
        self.count = 0


def distance(metric: Metric | str, a, b, counter: DistanceCounter | None = None) -> float:
    """Distance between two vectors under ``metric``.

    Accumulates in float32, the same precision the index kernels use.
    """
    metric = Metric.parse(metric)
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if counter is not None:
        counter.add()
    if metric is Metric.L2:
        diff = a - b
        return float(np.dot(diff, diff))
    na = float(np.dot(a, a))
    nb = float(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 1.0
    return float(max(0.0, 1.0 - np.dot(a, b) / np.float32(np.sqrt(na * nb))))


def native_distance(metric: Metric | str, d: np.ndarray | float) -> np.ndarray | float:
    """Convert internal distances to the metric's natural scale (sqrt for L2)."""
    if Metric.parse(metric) is Metric.L2:
        return np.sqrt(d)
    return d


@dataclass
class HybridDataset:
    """Append-only store of float32 vectors paired with int64 attributes.

    Ids are dense and follow insertion order.
    """

    dim: int
    metric: Metric = Metric.L2
    _vectors: np.ndarray = field(init=False, repr=False)
    _attributes: np.ndarray = field(init=False, repr=False)
    n: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        self.metric = Metric.parse(self.metric)
        self._vectors = np.empty((0, self.dim), dtype=np.float32)
        self._attributes = np.empty(0, dtype=np.int64)

    @classmethod
    def from_arrays(cls, vectors, attributes, metric: Metric | str = Metric.L2) -> "HybridDataset":
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        attributes = np.ascontiguousarray(attributes, dtype=np.int64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if len(vectors) != len(attributes):
            raise ValueError(
                f"{len(vectors)} vectors but {len(attributes)} attributes"
            )
        ds = cls(vectors.shape[1], Metric.parse(metric))
        ds._vectors = vectors
        ds._attributes = attributes
        ds.n = len(vectors)
        return ds

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors[: self.n]

    @property
    def attributes(self) -> np.ndarray:
        return self._attributes[: self.n]

    def __len__(self) -> int:
        return self.n

    def append(self, vector, attribute: int) -> int:
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dim,):
            raise ValueError(f"expected vector of dimension {self.dim}, got {vector.shape}")
        if self.n == len(self._vectors):
            cap = max(16, 2 * self.n)
            vecs = np.empty((cap, self.dim), dtype=np.float32)
            vecs[: self.n] = self._vectors[: self.n]
            attrs = np.empty(cap, dtype=np.int64)
            attrs[: self.n] = self._attributes[: self.n]
            self._vectors, self._attributes = vecs, attrs
        self._vectors[self.n] = vector
        self._attributes[self.n] = int(attribute)
        vid = self.n
        self.n += 1
        return vid
