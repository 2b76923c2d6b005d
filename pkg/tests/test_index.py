import math

import numpy as np
import pytest

from conftest import build, gaussian
from windowgraph import _kernels as K
from windowgraph import IndexParams, RangeFilter, SearchStats, WindowGraphIndex, brute_knn, recall
from windowgraph.index import fraction_bounds, fraction_case, landing_layer, top_for
from windowgraph.invariants import check_all


# ---------------------------------------------------------------- pruning


def _prune(points, base, budget):
    vecs = np.asarray(points, dtype=np.float32)
    ids = np.array([i for i in range(len(vecs)) if i != base], dtype=np.int64)
    ds = K.dist_to_many(vecs, ids, vecs[base], 0)
    return K.rng_prune(vecs, 0, base, ids, ds, budget, True).tolist()


def test_rng_prune_drops_dominated_point():
    # base at 0, candidates at 1 and 2: the point at 2 is closer to 1 than to 0
    assert _prune([[0.0], [1.0], [2.0]], 0, 2) == [1]


def test_rng_prune_single_and_zero_budget():
    assert _prune([[0.0], [3.0]], 0, 4) == [1]
    assert _prune([[0.0], [3.0], [-3.0]], 0, 0) == []


def test_rng_prune_matches_exhaustive_definition():
    rng = np.random.default_rng(0)
    vecs = rng.normal(size=(60, 3)).astype(np.float32)
    ids = np.arange(1, 60, dtype=np.int64)
    d = K.dist_to_many(vecs, ids, vecs[0], 0)
    kept = K.rng_prune(vecs, 0, 0, ids, d, 59, True).tolist()
    # independent greedy replay in float64
    order = sorted(range(1, 60), key=lambda c: (float(((vecs[c] - vecs[0]) ** 2).sum()), c))
    want = []
    for c in order:
        dc = ((vecs[c] - vecs[0]).astype(np.float64) ** 2).sum()
        if all(((vecs[c] - vecs[u]).astype(np.float64) ** 2).sum() >= dc for u in want):
            want.append(c)
    assert kept == want


# ------------------------------------------------------------- layer law


def test_empty_index_first_insert():
    index = WindowGraphIndex(2)
    assert index.insert([0.0, 0.0], 5) == 0
    assert index.top == 0
    assert len(index.neighbors(0, 0)) == 0


def test_top_raises_at_third_and_ninth_unique_value():
    index = WindowGraphIndex(2, IndexParams(m=4, omega_c=8, o=4))
    tops = []
    for i in range(9):
        index.insert([float(i), 0.0], i)
        tops.append(index.top)
    assert tops == [0, 0, 1, 1, 1, 1, 1, 1, 2]


def test_duplicates_do_not_raise_top():
    index = WindowGraphIndex(2, IndexParams(m=4, omega_c=8, o=4))
    for i in range(30):
        index.insert([float(i), 1.0], i % 2)
    assert index.top == 0


@pytest.mark.parametrize("unique,o,want", [(1, 4, 0), (2, 4, 0), (3, 4, 1), (9, 4, 2), (10000, 4, 7), (5000, 4, 6), (1_000_000, 4, 10), (50, 4, 3)])
def test_top_for(unique, o, want):
    assert top_for(unique, o) == want
    assert want == max(0, math.ceil(math.log(unique / 2, o) - 1e-12))


# ---------------------------------------------------------- landing layer


@pytest.mark.parametrize("n_prime,want", [(2048, 5), (100, 3), (3, 0)])
def test_landing_layer_examples(n_prime, want):
    assert landing_layer(n_prime, 4, top=10) == want


def test_landing_layer_against_ratio_oracle():
    for o in (2, 3, 4, 8):
        for n_prime in range(1, 3000, 7):
            top = 12
            lh = max(0, min(top, math.floor(math.log(n_prime / 2, o) + 1e-12))) if n_prime >= 2 else 0

            def score(l):
                w = 2 * o**l
                return min(w, n_prime) / max(w, n_prime)

            cands = sorted({lh, min(lh + 1, top)})
            want = max(cands, key=lambda l: (score(l), -l))
            assert landing_layer(n_prime, o, top) == want, (o, n_prime)


def test_landing_layer_clamped_to_top():
    assert landing_layer(10**6, 4, top=3) == 3


# --------------------------------------------------------- fraction bounds


def _bounds_oracle(o, l, n_prime):
    """Piecewise bounds evaluated from the real-valued log."""
    lp = math.log(n_prime / 2, o)
    if l > lp - 0.5:
        return (3 / 4 - 1 / (4 * o**l), 1 - (o**l + 1) / (4 * o ** (l + 0.5)))
    if o > 4:
        return (1 / math.sqrt(o), 1 / 2)
    return (math.sqrt(2) / 2 - 1 / (4 * o ** (l + 1)), 3 / 4 - 1 / (4 * o ** (l + 1)))


def test_fraction_bounds_o2_l10_anchor():
    lo, hi = fraction_bounds(2, 10, 2048)
    assert fraction_case(2, 10, 2048) == "c"
    assert lo == pytest.approx(0.7497, abs=1e-3)
    assert hi == pytest.approx(0.8230, abs=1e-3)


def test_fraction_bounds_case_c_small():
    assert fraction_bounds(4, 1, 8) == pytest.approx((0.6875, 0.84375))


def test_fraction_bounds_case_a():
    n_prime = 2 * 16**2 * 12  # log_16(n'/2) = 2 + 0.896, so l is more than half below
    assert fraction_case(16, 2, n_prime) == "a"
    lo, hi = fraction_bounds(16, 2, n_prime)
    assert (lo, hi) == pytest.approx((0.25, 0.5))


def test_fraction_bounds_against_oracle():
    for o in (2, 3, 4, 5, 8, 16):
        for n_prime in range(2, 5000, 13):
            l = 0
            while 2 * o ** (l + 1) <= n_prime:
                l += 1
            lp = math.log(n_prime / 2, o)
            if abs(lp - l - 0.5) < 1e-9:
                continue  # the boundary itself belongs to case c; float log cannot decide it
            assert fraction_bounds(o, l, n_prime) == pytest.approx(_bounds_oracle(o, l, n_prime)), (o, n_prime)


def test_fraction_bounds_rejects_wrong_layer():
    with pytest.raises(ValueError):
        fraction_bounds(4, 2, 8)


# ------------------------------------------------------------------ search


def _labelled_graph():
    """Seven labelled vertices; attribute = label, target sits at the origin."""
    labels = [1, 2, 10, 35, 60, 72, 74, 98, 99]  # 1 and 2 are isolated fillers so top reaches 2
    pos = {1: (50.0, 50.0), 2: (60.0, 60.0), 10: (0.5, 0.1), 35: (0.2, 0.6), 60: (2.0, 0.0), 72: (5.0, 0.0),
           74: (1.0, 0.0), 98: (3.0, 0.0), 99: (2.5, 0.0)}
    index = WindowGraphIndex(2, IndexParams(m=4, omega_c=4, o=4))
    vid = {}
    for a in labels:
        vid[a] = index.insert(pos[a], a)
    assert index.top == 2
    index._deg[:] = 0
    edges = {
        2: {72: [10, 35], 74: [60, 10], 60: [35]},
        1: {72: [74], 74: [99], 60: [98]},
    }
    for layer, rows in edges.items():
        for a, nb in rows.items():
            index._nbrs[layer, vid[a], : len(nb)] = [vid[b] for b in nb]
            index._deg[layer, vid[a]] = len(nb)
    return index, vid


def test_hand_built_candidate_acquisition():
    index, vid = _labelled_graph()
    found = index.search_candidates(vid[72], [0.0, 0.0], RangeFilter(48, 99), (1, 2), 4)
    labels = sorted(int(index.attributes[i]) for i, _ in found)
    assert labels == [60, 74, 98, 99]


def test_single_in_range_vertex_returns_entry():
    index, vid = _labelled_graph()
    for w in (1, 3, 10):
        found = index.search_candidates(vid[72], [9.0, 9.0], RangeFilter(70, 73), (0, 2), w)
        assert [i for i, _ in found] == [vid[72]]


def test_candidates_saturate_to_brute_force():
    vecs = gaussian(500, 8, seed=3)
    attrs = np.random.default_rng(4).permutation(500)
    index = build(vecs, attrs, m=16, omega_c=64)
    ds = index.dataset()
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = int(rng.integers(0, 400))
        r = RangeFilter(x, x + 99)
        q = rng.normal(size=8).astype(np.float32)
        gold = brute_knn(ds, q, r, 100)
        found = index.search_knn(q, r, 100, 100)
        assert recall([i for i, _ in found], gold, 100) >= 0.95


def test_search_knn_singleton_and_empty():
    index = build(gaussian(50, 4), np.arange(50) * 2, m=8, omega_c=16)
    assert [i for i, _ in index.search_knn(np.zeros(4), RangeFilter(10, 10), 1, 1)] == [5]
    assert index.search_knn(np.zeros(4), RangeFilter(11, 11), 5, 5) == []
    assert index.search_knn(np.zeros(4), RangeFilter(1000, 2000), 5, 5) == []


def test_search_knn_recall_against_oracle(small_index):
    ds = small_index.dataset()
    rng = np.random.default_rng(7)
    scores = []
    for _ in range(200):
        x, y = sorted(rng.integers(0, 2000, 2).tolist())
        r = RangeFilter(x, y)
        q = rng.normal(size=16).astype(np.float32)
        gold = brute_knn(ds, q, r, 10)
        found = small_index.search_knn(q, r, 10, max(10, gold.n_prime_total))
        scores.append(recall([i for i, _ in found], gold, 10))
    assert np.mean(scores) >= 0.99


def test_search_results_sorted_and_in_range(small_index):
    rng = np.random.default_rng(8)
    for _ in range(50):
        x = int(rng.integers(0, 1900))
        r = RangeFilter(x, x + 100)
        found = small_index.search_knn(rng.normal(size=16), r, 10, 32)
        d = [dist for _, dist in found]
        assert d == sorted(d)
        assert all(r.x <= small_index.attributes[i] <= r.y for i, _ in found)


def test_omega_below_k_rejected(small_index):
    with pytest.raises(ValueError):
        small_index.search_knn(np.zeros(16), RangeFilter(0, 10), 10, 5)


def test_dc_counts_match_counter(small_index):
    from windowgraph import DistanceCounter

    c, st = DistanceCounter(), SearchStats()
    small_index.search_knn(np.ones(16), RangeFilter(100, 900), 10, 64, counter=c, stats=st)
    assert c.count == st.dc > 0


# ------------------------------------------------------------ soft delete


def test_delete_then_search_singleton_range():
    index = build(gaussian(40, 4), np.arange(40), m=8, omega_c=16)
    assert index.soft_delete(7) is True
    assert index.search_knn(np.zeros(4), RangeFilter(7, 7), 1, 1) == []
    assert index.soft_delete(7) is False


def test_deleted_never_returned(small_index):
    index = build(small_index.vectors, small_index.attributes, omega_c=32)
    rng = np.random.default_rng(9)
    dead = rng.choice(index.n, 200, replace=False)
    for v in dead:
        index.soft_delete(int(v))
    dead_set = set(dead.tolist())
    for _ in range(50):
        found = index.search_knn(rng.normal(size=16), RangeFilter(0, 1999), 10, 64)
        assert not dead_set & {i for i, _ in found}


# ---------------------------------------------------------------- structure


def test_structural_stats_trivial():
    s = WindowGraphIndex(3).structural_stats()
    assert s["n"] == 0 and s["total_edges"] == 0
    one = WindowGraphIndex(3)
    one.insert([1, 2, 3], 0)
    s = one.structural_stats()
    assert s["total_edges"] == 0 and s["top"] == 0


def test_space_bound_and_invariants(small_index):
    s = small_index.structural_stats()
    assert s["total_edges"] <= small_index.space_bound()
    assert s["total_edges"] == sum(len(small_index.neighbors(l, v)) for l in range(small_index.top + 1) for v in range(small_index.n))
    assert check_all(small_index) == []
    assert s["serialized_size"] == len(small_index.to_bytes())


def test_pruned_lists_stay_inside_window():
    """Every list rewritten by the two-stage prune holds only in-window neighbors at that moment."""
    vecs = gaussian(2000, 8, seed=11)
    attrs = np.random.default_rng(12).permutation(2000)
    index = WindowGraphIndex(8, IndexParams(m=16, omega_c=64))
    checked = []
    original = index._link

    def link(layer, b, vid):
        before = int(index._deg[layer, b])
        original(layer, b, vid)
        if before == index.params.m:  # full list, so the two-stage prune ran
            nb = index.neighbors(layer, b)
            w = index.window(b, layer)
            a = index.attributes[nb]
            checked.append(int(np.count_nonzero((a < w.w_min) | (a > w.w_max))))

    index._link = link
    index.insert_many(vecs, attrs)
    assert len(checked) > 1000
    assert sum(checked) == 0


def test_parallel_build_keeps_invariants():
    vecs = gaussian(1500, 8, seed=13)
    attrs = np.random.default_rng(14).permutation(1500)
    index = build(vecs, attrs, omega_c=32, threads=4)
    assert index.n == 1500
    assert check_all(index) == []


def test_sequential_build_is_deterministic():
    vecs = gaussian(400, 8, seed=15)
    attrs = np.random.default_rng(16).integers(0, 100, 400)
    a = build(vecs, attrs, omega_c=32, seed=3).to_bytes()
    b = build(vecs, attrs, omega_c=32, seed=3).to_bytes()
    assert a == b


def test_params_validation():
    with pytest.raises(ValueError):
        IndexParams(m=15)
    with pytest.raises(ValueError):
        IndexParams(m=16, omega_c=8)
    with pytest.raises(ValueError):
        IndexParams(o=1)


def test_cosine_index_runs():
    vecs = gaussian(300, 6, seed=17)
    index = build(vecs, np.arange(300), metric="cosine", omega_c=32)
    gold = brute_knn(index.dataset(), vecs[0], RangeFilter(0, 299), 5)
    found = index.search_knn(vecs[0], RangeFilter(0, 299), 5, 64)
    assert recall([i for i, _ in found], gold, 5) >= 0.8
    assert found[0][0] == 0
