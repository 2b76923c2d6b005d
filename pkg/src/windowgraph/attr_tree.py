"""Weight-balanced (BB[alpha]) order-statistic tree over unique attribute values.

Every node stores how many unique values live in its subtree (``usize``) and
how many vectors share those values (``tsize``), so rank, select, window and
range-cardinality queries are single-branch descents.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator

ALPHA = 0.292


class _Node:
    __slots__ = ("value", "dup", "usize", "tsize", "left", "right")

    def __init__(self, value: int, dup: int = 1) -> None:
        self.value = value
        self.dup = dup
        self.usize = 1
        self.tsize = dup
        self.left: _Node | None = None
        self.right: _Node | None = None


def _us(node: _Node | None) -> int:
    return node.usize if node is not None else 0


def _ts(node: _Node | None) -> int:
    return node.tsize if node is not None else 0


def _fix(node: _Node) -> _Node:
    node.usize = 1 + _us(node.left) + _us(node.right)
    node.tsize = node.dup + _ts(node.left) + _ts(node.right)
    return node


def _rotate_left(x: _Node) -> _Node:
    y = x.right
    x.right = y.left
    y.left = _fix(x)
    return _fix(y)


def _rotate_right(x: _Node) -> _Node:
    y = x.left
    x.left = y.right
    y.right = _fix(x)
    return _fix(y)


def _left_share(node: _Node) -> float:
    return (_us(node.left) + 1) / (node.usize + 1)


def _balance(node: _Node) -> _Node:
    # Blum-Mehlhorn: single rotation when the heavy child leans outward
    # (share <= 1/(2-alpha)), double rotation otherwise.
    share = _left_share(node)
    if share < ALPHA:
        if _left_share(node.right) > 1.0 / (2.0 - ALPHA):
            node.right = _rotate_right(node.right)
        return _rotate_left(node)
    if share > 1.0 - ALPHA:
        if _left_share(node.left) < 1.0 - 1.0 / (2.0 - ALPHA):
            node.left = _rotate_left(node.left)
        return _rotate_right(node)
    return node


@dataclass(frozen=True)
class Window:
    w_min: int
    w_max: int

    def __contains__(self, a: int) -> bool:
        return self.w_min <= a <= self.w_max


@dataclass(frozen=True)
class Cardinality:
    unique: int
    total: int


class AttributeTree:
    """Order-statistic BB[alpha] tree keyed by attribute value.

    Duplicate values are counted on the existing node rather than inserted,
    so ranks and windows are over *unique* values.
    """

    def __init__(self) -> None:
        self._root: _Node | None = None

    def __len__(self) -> int:
        return _us(self._root)

    @property
    def unique_count(self) -> int:
        return _us(self._root)

    @property
    def total_count(self) -> int:
        return _ts(self._root)

    def __contains__(self, a: int) -> bool:
        return self._find(a) is not None

    def __iter__(self) -> Iterator[int]:
        for node in self._inorder():
            yield node.value

    def items(self) -> Iterator[tuple[int, int]]:
        """``(value, dup_count)`` pairs in ascending order."""
        for node in self._inorder():
            yield node.value, node.dup

    def _inorder(self) -> Iterator[_Node]:
        stack: list[_Node] = []
        node = self._root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node
            node = node.right

    def _find(self, a: int) -> _Node | None:
        node = self._root
        while node is not None:
            if a < node.value:
                node = node.left
            elif a > node.value:
                node = node.right
            else:
                return node
        return None

    # ------------------------------------------------------------------ insert

    def insert(self, a: int) -> tuple[int, bool]:
        """Insert ``a``; returns ``(rank, is_new)``.

        ``rank`` is the number of unique values strictly below ``a``.
        """
        a = int(a)
        rank, found = self.get_rank(a, exact=True)
        if found:
            self._bump(a)
            return rank, False
        self._root = self._insert(self._root, a)
        return rank, True

    def _bump(self, a: int) -> None:
        node = self._root
        while node is not None:
            node.tsize += 1
            if a < node.value:
                node = node.left
            elif a > node.value:
                node = node.right
            else:
                node.dup += 1
                return

    def _insert(self, node: _Node | None, a: int) -> _Node:
        if node is None:
            return _Node(a)
        if a < node.value:
            node.left = self._insert(node.left, a)
        else:
            node.right = self._insert(node.right, a)
        return _balance(_fix(node))

    # ------------------------------------------------------------------- ranks

    def get_rank(self, a: int, exact: bool = False):
        """Count of unique values ``< a``.

        With ``exact=True`` returns ``(rank, present)``.
        """
        node = self._root
        rank = 0
        found = False
        while node is not None:
            if a < node.value:
                node = node.left
            elif a > node.value:
                rank += _us(node.left) + 1
                node = node.right
            else:
                rank += _us(node.left)
                found = True
                break
        return (rank, found) if exact else rank

    def _total_below(self, a: int) -> int:
        """Number of vectors (duplicates included) with value ``< a``."""
        node = self._root
        total = 0
        while node is not None:
            if a < node.value:
                node = node.left
            elif a > node.value:
                total += _ts(node.left) + node.dup
                node = node.right
            else:
                total += _ts(node.left)
                break
        return total

    def select(self, rank: int) -> int:
        """The ``rank``-th smallest unique value (0-based)."""
        if not 0 <= rank < len(self):
            raise IndexError(f"rank {rank} out of bounds for {len(self)} unique values")
        return self._select_in(self._root, rank).value

    @staticmethod
    def _select_in(node: _Node, rank: int) -> _Node:
        while True:
            lsize = _us(node.left)
            if rank < lsize:
                node = node.left
            elif rank > lsize:
                rank -= lsize + 1
                node = node.right
            else:
                return node

    def min(self) -> int:
        return self.select(0)

    def max(self) -> int:
        return self.select(len(self) - 1)

    def dup_count(self, a: int) -> int:
        node = self._find(a)
        return node.dup if node is not None else 0

    # ------------------------------------------------------------------ window

    def get_window(self, a: int, half: int) -> Window:
        """Window of ``half`` unique values on each side of ``a``, clamped to the extremes."""
        if half < 1:
            raise ValueError("half window must be >= 1")
        path: list[_Node] = []
        node = self._root
        while node is not None:
            path.append(node)
            if a < node.value:
                node = node.left
            elif a > node.value:
                node = node.right
            else:
                break
        else:
            raise KeyError(f"attribute value {a} not in tree")
        return Window(self._boundary(path, half, left=True), self._boundary(path, half, left=False))

    def _boundary(self, path: list[_Node], budget: int, left: bool) -> int:
        def near(n: _Node) -> _Node | None:
            return n.left if left else n.right

        def far(n: _Node) -> _Node | None:
            return n.right if left else n.left

        def closest(sub: _Node, r: int) -> int:
            # r-th closest value to the center inside ``sub`` (1-based)
            size = sub.usize
            return self._select_in(sub, size - r if left else r - 1).value

        c = path[-1]
        inner = _us(near(c))
        if budget <= inner:
            return closest(near(c), budget)
        budget -= inner
        for i in range(len(path) - 1, 0, -1):
            child, parent = path[i], path[i - 1]
            if child is not far(parent):
                continue
            side = _us(near(parent))
            if side + 1 >= budget:
                if budget == 1:
                    return parent.value
                return closest(near(parent), budget - 1)
            budget -= side + 1
        return self.min() if left else self.max()

    # ------------------------------------------------------------- cardinality

    def filtered_cardinality(self, x: int, y: int) -> Cardinality:
        """Unique and total counts of values inside ``[x, y]``."""
        if x > y or self._root is None:
            return Cardinality(0, 0)
        lo = self.get_rank(x)
        hi_rank, hi_found = self.get_rank(y, exact=True)
        hi = hi_rank + (1 if hi_found else 0)
        unique = max(0, hi - lo)
        if unique == 0:
            return Cardinality(0, 0)
        total = self._total_below(y) + self.dup_count(y) - self._total_below(x)
        return Cardinality(unique, total)

    def rank_span(self, x: int, y: int) -> tuple[int, int] | None:
        """Inclusive rank interval of unique values inside ``[x, y]``, or None."""
        lo = self.get_rank(x)
        hi_rank, hi_found = self.get_rank(y, exact=True)
        hi = hi_rank + (1 if hi_found else 0) - 1
        return (lo, hi) if hi >= lo else None

    # ------------------------------------------------------------- invariants

    def height(self) -> int:
        def h(node: _Node | None) -> int:
            return 0 if node is None else 1 + max(h(node.left), h(node.right))

        return h(self._root)

    def check(self) -> None:
        """Raise AssertionError on any ordering, size or balance violation."""

        def walk(node: _Node | None, lo, hi) -> tuple[int, int]:
            if node is None:
                return 0, 0
            if lo is not None and node.value <= lo:
                raise AssertionError(f"order violated at {node.value}")
            if hi is not None and node.value >= hi:
                raise AssertionError(f"order violated at {node.value}")
            if node.dup < 1:
                raise AssertionError(f"dup_count < 1 at {node.value}")
            lu, lt = walk(node.left, lo, node.value)
            ru, rt = walk(node.right, node.value, hi)
            if node.usize != 1 + lu + ru or node.tsize != node.dup + lt + rt:
                raise AssertionError(f"size bookkeeping wrong at {node.value}")
            weight = node.usize + 1
            if lu + 1 < ALPHA * weight or ru + 1 < ALPHA * weight:
                raise AssertionError(f"weight balance violated at {node.value}")
            return node.usize, node.tsize

        walk(self._root, None, None)

    # ----------------------------------------------------------- serialization

    _PAIR = struct.Struct("<qI")

    def to_bytes(self) -> bytes:
        """``u64`` pair count, then sorted ``(i64 value, u32 dup_count)`` pairs."""
        pairs = list(self.items())
        out = bytearray(struct.pack("<Q", len(pairs)))
        for value, dup in pairs:
            out += self._PAIR.pack(value, dup)
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf: bytes | memoryview, offset: int = 0) -> tuple["AttributeTree", int]:
        """Rebuild a balanced tree from :meth:`to_bytes` output; returns ``(tree, end_offset)``."""
        if len(buf) - offset < 8:
            raise ValueError("attribute tree: truncated pair count")
        (count,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
        need = count * cls._PAIR.size
        if len(buf) - offset < need:
            raise ValueError("attribute tree: truncated value stream")
        pairs = [cls._PAIR.unpack_from(buf, offset + i * cls._PAIR.size) for i in range(count)]
        for (a, _), (b, _) in zip(pairs, pairs[1:]):
            if a >= b:
                raise ValueError("attribute tree: values not strictly increasing")
        if any(dup < 1 for _, dup in pairs):
            raise ValueError("attribute tree: zero dup_count")
        tree = cls()
        tree._root = cls._build(pairs, 0, len(pairs))
        return tree, offset + need

    @classmethod
    def from_sorted(cls, pairs: list[tuple[int, int]]) -> "AttributeTree":
        tree = cls()
        tree._root = cls._build(pairs, 0, len(pairs))
        return tree

    @classmethod
    def _build(cls, pairs, lo: int, hi: int) -> _Node | None:
        if lo >= hi:
            return None
        mid = (lo + hi) // 2
        node = _Node(int(pairs[mid][0]), int(pairs[mid][1]))
        node.left = cls._build(pairs, lo, mid)
        node.right = cls._build(pairs, mid + 1, hi)
        return _fix(node)
