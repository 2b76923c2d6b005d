"""Structural invariant checks over a built index."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .index import WindowGraphIndex, top_for


class InvariantViolation(AssertionError):
    def __init__(self, name: str, detail: str) -> None:
        super().__init__(f"{name}: {detail}")
        self.name = name
        self.detail = detail


def check_graph(index: WindowGraphIndex) -> list[InvariantViolation]:
    """Degree caps, id validity, self-loops and duplicate entries on every layer."""
    out: list[InvariantViolation] = []
    n, m = index.n, index.params.m
    if n == 0:
        return out
    slots = np.arange(m)[None, :]
    for layer in range(index.top + 1):
        deg = index._deg[layer, :n]
        nbrs = index._nbrs[layer, :n].astype(np.int64)
        over = np.flatnonzero((deg < 0) | (deg > m))
        if len(over):
            out.append(InvariantViolation("degree-cap invariant", f"layer {layer} vertex {over[0]} has degree {deg[over[0]]}"))
            continue
        used = slots < deg[:, None]
        bad = used & ((nbrs < 0) | (nbrs >= n))
        if bad.any():
            v, j = np.argwhere(bad)[0]
            out.append(InvariantViolation("valid-id invariant", f"layer {layer} vertex {v} slot {j} holds id {nbrs[v, j]}"))
        loops = used & (nbrs == np.arange(n)[:, None])
        if loops.any():
            v = np.argwhere(loops)[0][0]
            out.append(InvariantViolation("no-self-loop invariant", f"layer {layer} vertex {v} points to itself"))
        rows = np.where(used, nbrs, -1 - slots)
        srt = np.sort(rows, axis=1)
        dup = (srt[:, 1:] == srt[:, :-1]) & (srt[:, 1:] >= 0)
        if dup.any():
            v = np.argwhere(dup)[0][0]
            out.append(InvariantViolation("no-duplicate invariant", f"layer {layer} vertex {v} repeats a neighbor"))
    return out


def check_tree(index: WindowGraphIndex) -> list[InvariantViolation]:
    out: list[InvariantViolation] = []
    try:
        index.tree.check()
    except AssertionError as exc:
        out.append(InvariantViolation("tree-balance invariant", str(exc)))
        return out
    expected = Counter(index.attributes.tolist())
    if dict(index.tree.items()) != dict(expected):
        out.append(InvariantViolation("tree-content invariant", "tree values/dup counts differ from stored attributes"))
    return out


def check_top(index: WindowGraphIndex) -> list[InvariantViolation]:
    want = top_for(index.tree.unique_count, index.params.o)
    if index.n and index.top != want:
        return [InvariantViolation("top-layer invariant", f"top={index.top}, expected {want}")]
    return []


def check_all(index: WindowGraphIndex) -> list[InvariantViolation]:
    return check_graph(index) + check_tree(index) + check_top(index)
