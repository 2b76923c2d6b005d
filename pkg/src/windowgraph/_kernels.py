"""Compiled hot loops: distances, multi-layer beam search and RNG pruning.

All kernels release the GIL.  Graph arrays are read without locks, so every
neighbor list read is bounded by ``m`` and by the array capacity; a torn read
can only cost recall.
"""

from __future__ import annotations

import numpy as np
from numba import njit

METRIC_L2 = 0
METRIC_COSINE = 1


@njit(nogil=True, cache=True, inline="always")
def dist(a, b, metric):
    if metric == METRIC_L2:
        s = np.float32(0.0)
        for i in range(a.shape[0]):
            t = a[i] - b[i]
            s += t * t
        return s
    dot = np.float32(0.0)
    na = np.float32(0.0)
    nb = np.float32(0.0)
    for i in range(a.shape[0]):
        dot += a[i] * b[i]
        na += a[i] * a[i]
        nb += b[i] * b[i]
    if na == 0.0 or nb == 0.0:
        return np.float32(1.0)
    r = np.float32(1.0) - dot / np.float32(np.sqrt(na * nb))
    if r < 0.0:
        return np.float32(0.0)
    return r


@njit(nogil=True, cache=True)
def dist_to_many(vecs, ids, q, metric):
    out = np.empty(ids.shape[0], dtype=np.float32)
    for i in range(ids.shape[0]):
        out[i] = dist(vecs[ids[i]], q, metric)
    return out


# --------------------------------------------------------------------- heaps
# Entries compare lexicographically on (distance, id).


@njit(nogil=True, cache=True, inline="always")
def _less(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


@njit(nogil=True, cache=True)
def _min_push(hd, hi, size, d, i):
    if size == hd.shape[0]:
        nd = np.empty(2 * size, dtype=hd.dtype)
        ni = np.empty(2 * size, dtype=hi.dtype)
        nd[:size] = hd
        ni[:size] = hi
        hd, hi = nd, ni
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(d, i, hd[parent], hi[parent]):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return hd, hi, size + 1


@njit(nogil=True, cache=True)
def _min_pop(hd, hi, size):
    size -= 1
    d = hd[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(hd[child + 1], hi[child + 1], hd[child], hi[child]):
            child += 1
        if _less(hd[child], hi[child], d, i):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size


@njit(nogil=True, cache=True)
def _max_push(hd, hi, size, d, i):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(hd[parent], hi[parent], d, i):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size + 1


@njit(nogil=True, cache=True)
def _max_pop(hd, hi, size):
    size -= 1
    d = hd[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            child += 1
        if _less(d, i, hd[child], hi[child]):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hd[pos] = d
    hi[pos] = i
    return size


@njit(nogil=True, cache=True)
def sort_pairs(ids, dists):
    """Order by (distance, id)."""
    by_id = np.argsort(ids, kind="mergesort")
    by_d = np.argsort(dists[by_id], kind="mergesort")
    order = by_id[by_d]
    return ids[order].copy(), dists[order].copy()


# -------------------------------------------------------------- beam search


@njit(nogil=True, cache=True)
def search_candidates(
    vecs, attrs, deleted, nbrs, deg, metric, m,
    ep, q, x, y, lmin, lmax, omega,
    visited, epoch, early_stop, skip,
):
    """Multi-layer beam search restricted to attributes in ``[x, y]``.

    Returns ``(ids, dists, dc, hops, lowest_layers, landing_frac_sum,
    landing_frac_hops)`` with ids/dists sorted by (distance, id).
    ``lowest_layers[h]`` is the lowest layer scanned at hop ``h``.
    ``skip`` (or -1) is never evaluated.
    """
    cap = vecs.shape[0]
    cd = np.empty(max(64, 2 * omega), dtype=np.float32)
    ci = np.empty(max(64, 2 * omega), dtype=np.int64)
    csize = 0
    ud = np.empty(omega + 1, dtype=np.float32)
    ui = np.empty(omega + 1, dtype=np.int64)
    usize = 0
    lows = np.empty(64, dtype=np.int32)
    hops = 0
    dc = 0
    frac_sum = 0.0
    frac_hops = 0

    if skip >= 0:
        visited[skip] = epoch
    visited[ep] = epoch
    d0 = dist(vecs[ep], q, metric)
    dc += 1
    cd, ci, csize = _min_push(cd, ci, csize, d0, ep)
    if deleted[ep] == 0:
        usize = _max_push(ud, ui, usize, d0, ep)

    while csize > 0:
        sd = cd[0]
        s = ci[0]
        csize = _min_pop(cd, ci, csize)
        if usize == omega and (sd > ud[0]):
            break
        cn = 0
        nxt = True
        layer = lmax
        lowest = lmax
        while layer >= lmin and nxt:
            nxt = not early_stop
            lowest = layer
            cnt = deg[layer, s]
            if cnt > m:
                cnt = m
            if layer == lmax and cnt > 0:
                inr = 0
                for j in range(cnt):
                    a = attrs[nbrs[layer, s, j]]
                    if a >= x and a <= y:
                        inr += 1
                frac_sum += inr / cnt
                frac_hops += 1
            for j in range(cnt):
                v = nbrs[layer, s, j]
                if v < 0 or v >= cap or visited[v] == epoch:
                    continue
                a = attrs[v]
                if a < x or a > y:
                    nxt = True
                elif cn < m:
                    visited[v] = epoch
                    cn += 1
                    dv = dist(vecs[v], q, metric)
                    dc += 1
                    if usize < omega or _less(dv, v, ud[0], ui[0]):
                        cd, ci, csize = _min_push(cd, ci, csize, dv, v)
                        if deleted[v] == 0:
                            usize = _max_push(ud, ui, usize, dv, v)
                            if usize > omega:
                                usize = _max_pop(ud, ui, usize)
            layer -= 1
        if hops == lows.shape[0]:
            grown = np.empty(2 * hops, dtype=np.int32)
            grown[:hops] = lows
            lows = grown
        lows[hops] = lowest
        hops += 1

    rd = ud[:usize].copy()
    ri = ui[:usize].copy()
    ri, rd = sort_pairs(ri, rd)
    return ri, rd, dc, hops, lows[:hops].copy(), frac_sum, frac_hops


# ------------------------------------------------------------------ pruning


@njit(nogil=True, cache=True)
def rng_prune(vecs, metric, base, ids, dists, budget, use_rng):
    """Greedy RNG selection of up to ``budget`` ids from candidates of ``base``.

    A candidate ``c`` is dropped when an already kept ``u`` has
    ``dist(u, c) < dist(base, c)``.  With ``use_rng`` False this is plain
    nearest-``budget`` selection.
    """
    sids, sd = sort_pairs(ids, dists)
    kept = np.empty(min(budget, sids.shape[0]), dtype=np.int64)
    nk = 0
    for t in range(sids.shape[0]):
        if nk >= budget:
            break
        c = sids[t]
        if c == base:
            continue
        if nk > 0 and kept[nk - 1] == c:
            continue
        ok = True
        if use_rng:
            for u in range(nk):
                if dist(vecs[kept[u]], vecs[c], metric) < sd[t]:
                    ok = False
                    break
        if ok:
            kept[nk] = c
            nk += 1
    return kept[:nk].copy()


@njit(nogil=True, cache=True)
def reprune(vecs, attrs, deleted, nbrs, deg, metric, m, layer, b, newcomer, wlo, whi, use_rng):
    """Two-stage pruning of ``b``'s full list at ``layer`` after ``newcomer`` arrives.

    Stage one drops out-of-window and deleted neighbors, stage two RNG-prunes
    the survivors plus the newcomer to ``m``.
    """
    cnt = deg[layer, b]
    if cnt > m:
        cnt = m
    ids = np.empty(cnt + 1, dtype=np.int64)
    n = 0
    ids[n] = newcomer
    n += 1
    for j in range(cnt):
        c = nbrs[layer, b, j]
        if c == newcomer or c == b:
            continue
        a = attrs[c]
        if a < wlo or a > whi or deleted[c] != 0:
            continue
        ids[n] = c
        n += 1
    ids = ids[:n]
    ds = np.empty(n, dtype=np.float32)
    for j in range(n):
        ds[j] = dist(vecs[ids[j]], vecs[b], metric)
    kept = rng_prune(vecs, metric, b, ids, ds, m, use_rng)
    for j in range(kept.shape[0]):
        nbrs[layer, b, j] = kept[j]
    deg[layer, b] = kept.shape[0]
    return kept.shape[0]


@njit(nogil=True, cache=True)
def append_neighbor(nbrs, deg, m, layer, b, v):
    """Append ``v`` to ``b``'s list if there is room; False when full."""
    cnt = deg[layer, b]
    if cnt >= m:
        return False
    for j in range(cnt):
        if nbrs[layer, b, j] == v:
            return True
    nbrs[layer, b, cnt] = v
    deg[layer, b] = cnt + 1
    return True
