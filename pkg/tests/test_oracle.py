import numpy as np
import pytest

from conftest import build, gaussian
from windowgraph import DistanceCounter, HybridDataset, RangeFilter, WindowGraphIndex
from windowgraph.oracle import GoldResult, brute_knn, edge_quality, ground_truth, read_ground_truth, recall, write_ground_truth


def _dataset(n=200, d=5, seed=0):
    rng = np.random.default_rng(seed)
    return HybridDataset.from_arrays(rng.normal(size=(n, d)).astype(np.float32), rng.integers(0, 50, n))


def test_empty_range():
    g = brute_knn(_dataset(), np.zeros(5), RangeFilter(100, 200), 10)
    assert len(g.ids) == 0 and g.n_prime_total == 0


def test_k_at_least_n_prime_returns_all_sorted():
    ds = _dataset()
    r = RangeFilter(3, 4)
    g = brute_knn(ds, np.zeros(5), r, 1000)
    inside = np.flatnonzero((ds.attributes >= 3) & (ds.attributes <= 4))
    assert sorted(g.ids.tolist()) == inside.tolist()
    assert np.all(np.diff(g.dists) >= 0)


@pytest.mark.parametrize("metric", ["l2", "cosine"])
def test_double_implementation(metric):
    rng = np.random.default_rng(1)
    vecs = rng.normal(size=(200, 6)).astype(np.float32)
    attrs = rng.integers(0, 40, 200)
    ds = HybridDataset.from_arrays(vecs, attrs, metric)
    for _ in range(30):
        x, y = sorted(rng.integers(0, 40, 2).tolist())
        q = rng.normal(size=6)
        got = brute_knn(ds, q, RangeFilter(x, y), 7, wide=True)
        rows = []
        for i in range(200):
            if x <= attrs[i] <= y:
                v = vecs[i].astype(np.float64)
                if metric == "l2":
                    d = float(((v - q) ** 2).sum())
                else:
                    d = 1.0 - float(v @ q) / float(np.linalg.norm(v) * np.linalg.norm(q))
                rows.append((d, i))
        rows.sort()
        assert got.ids.tolist() == [i for _, i in rows[:7]]


def test_counter_counts_in_range_pairs():
    ds = _dataset()
    c = DistanceCounter()
    g = brute_knn(ds, np.zeros(5), RangeFilter(0, 9), 3, counter=c)
    assert c.count == g.n_prime_total == int(np.count_nonzero(ds.attributes <= 9))


def test_exclude_mask():
    ds = _dataset()
    g = brute_knn(ds, np.zeros(5), RangeFilter(0, 49), 5)
    mask = np.zeros(len(ds), dtype=bool)
    mask[g.ids[0]] = True
    g2 = brute_knn(ds, np.zeros(5), RangeFilter(0, 49), 5, exclude=mask)
    assert g.ids[0] not in g2.ids and g2.ids[0] == g.ids[1]


def test_recall_examples():
    gold = GoldResult(0, np.arange(10), np.zeros(10), 100)
    assert recall(range(10), gold, 10) == 1.0
    assert recall(list(range(9)) + [77], gold, 10) == pytest.approx(0.9)
    small = GoldResult(0, np.array([4, 5, 6]), np.zeros(3), 3)
    assert recall([4, 5, 6], small, 10) == 1.0
    assert recall([], GoldResult(0, np.empty(0, int), np.empty(0), 0), 10) == 1.0


def test_ground_truth_csv_round_trip(tmp_path):
    ds = _dataset()
    qs = np.random.default_rng(2).normal(size=(5, 5))
    rs = [RangeFilter(0, 10), RangeFilter(5, 5), RangeFilter(60, 70), RangeFilter(0, 49), RangeFilter(20, 30)]
    gold = ground_truth(ds, qs, rs, 4)
    write_ground_truth(tmp_path / "gt.csv", gold)
    back = read_ground_truth(tmp_path / "gt.csv")
    for a, b in zip(gold, back):
        assert a.ids.tolist() == b.ids.tolist() and a.n_prime_total == b.n_prime_total


def test_edge_quality_empty():
    q = edge_quality(WindowGraphIndex(3))
    assert q["window_violation_rate"] == 0.0 and q["domination_rate"] == 0.0


def test_edge_quality_matches_loop_oracle():
    vecs = gaussian(300, 4, seed=5)
    index = build(vecs, np.random.default_rng(6).permutation(300), m=8, omega_c=16)
    got = edge_quality(index, full_only=False)
    win_bad = win = dom_bad = 0
    for layer in range(index.top + 1):
        for v in range(index.n):
            nb = index.neighbors(layer, v).tolist()
            w = index.tree.get_window(int(index.attributes[v]), index.half_window(layer))
            for c in nb:
                win += 1
                win_bad += not (w.w_min <= index.attributes[c] <= w.w_max)
                dvc = float(((vecs[v] - vecs[c]) ** 2).sum())
                dominated = any(
                    float(((vecs[v] - vecs[u]) ** 2).sum()) < dvc and float(((vecs[u] - vecs[c]) ** 2).sum()) < dvc
                    for u in nb if u != c
                )
                dom_bad += dominated
    assert got["edges"] == got["window_edges"] == win
    assert got["window_violation_rate"] == pytest.approx(win_bad / win)
    assert got["domination_rate"] == pytest.approx(dom_bad / win)
