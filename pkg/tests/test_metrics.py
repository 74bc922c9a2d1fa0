import itertools
import math

import numpy as np
import pytest

from oracles import ari_pair_counting, exhaustive_metric_gap, nmi_contingency, set_partitions
from otprop.metrics import accuracy, ari, contingency, nmi, score_measure


def test_set_partition_counts():
    # Stirling numbers: S(5,1)+S(5,2)+S(5,3) = 1 + 15 + 25
    assert len(set_partitions(5, 3)) == 41
    assert len(set_partitions(8, 3)) == 1 + 127 + 966


def test_accuracy_examples():
    assert accuracy(list("aabb"), list("aabb")) == 1.0
    assert accuracy(["a", "b"], ["b", "a"]) == 0.0
    assert accuracy(list("aabb"), list("abbb")) == 0.75


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        accuracy([1, 2], [1])
    with pytest.raises(ValueError):
        nmi([], [])


def test_contingency_counts():
    table = contingency(["x", "x", "y", "y", "y"], [1, 2, 2, 2, 1])
    assert table.tolist() == [[1, 1], [1, 2]]


def test_nmi_examples():
    assert nmi(list("aabb"), list("aabb")) == 1.0
    assert nmi(list("aabb"), list("bbaa")) == pytest.approx(1.0, abs=1e-15)
    assert nmi(list("aabb"), list("cccc")) == 0.0
    assert nmi(list("aaaa"), list("cccc")) == 1.0


def test_nmi_independent_split_is_zero():
    truth, pred = np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])
    assert nmi(truth, pred) == pytest.approx(nmi_contingency(truth, pred[None, :], 2)[0], abs=1e-15)
    assert nmi(truth, pred) == pytest.approx(0.0, abs=1e-15)


def test_nmi_hand_value():
    # truth (a,a,b,b,b), predicted (x,y,y,y,y)
    n = 5
    cells = {(0, 0): 1, (0, 1): 1, (1, 1): 3}
    rows, cols = [2, 3], [1, 4]
    mi = sum(c / n * math.log(c * n / (rows[i] * cols[j])) for (i, j), c in cells.items())
    h = lambda v: -sum(x / n * math.log(x / n) for x in v)  # noqa: E731
    expected = 2 * mi / (h(rows) + h(cols))
    assert nmi(list("aabbb"), list("xyyyy")) == pytest.approx(expected, abs=1e-14)


def brute_force_ari(truth, pred):
    a = b = c = d = 0
    for i, j in itertools.combinations(range(len(truth)), 2):
        st, sp = truth[i] == truth[j], pred[i] == pred[j]
        a += st and sp
        b += st and not sp
        c += sp and not st
        d += not st and not sp
    N = a + b + c + d
    chance = (a + b) * (a + c) + (c + d) * (b + d)
    return 1.0 if N * N == chance else (N * (a + d) - chance) / (N * N - chance)


def test_ari_examples():
    assert ari(list("aabb"), list("aabb")) == 1.0
    assert ari(list("aabb"), list("abab")) == pytest.approx(brute_force_ari("aabb", "abab"), abs=1e-15)
    assert ari(list("aabb"), list("abab")) == pytest.approx(-0.5, abs=1e-15)


def test_ari_degenerate_partitions():
    assert ari([1, 1, 1], [2, 2, 2]) == 1.0
    assert ari([1, 2, 3], [4, 5, 6]) == 1.0


def test_ari_needs_two_points():
    with pytest.raises(ValueError):
        ari([1], [1])


def test_ari_brute_force_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        t, p = rng.integers(0, 4, n), rng.integers(0, 3, n)
        assert ari(t, p) == pytest.approx(brute_force_ari(t, p), abs=1e-12)


def test_vectorized_ari_oracle_agrees_with_loops():
    parts = set_partitions(5, 3)
    ref = ari_pair_counting(parts, parts)
    for i in range(0, len(parts), 7):
        for j in range(0, len(parts), 5):
            assert ref[i, j] == pytest.approx(brute_force_ari(parts[i], parts[j]), abs=1e-15)


@pytest.mark.parametrize("n", range(1, 7))
def test_exhaustive_small(n):
    worst_ari, worst_nmi, _ = exhaustive_metric_gap(n, 3, ari, nmi)
    assert worst_ari <= 1e-10
    assert worst_nmi <= 1e-10


def test_symmetry_and_renaming():
    rng = np.random.default_rng(1)
    for _ in range(30):
        t, p = rng.integers(0, 3, 40), rng.integers(0, 4, 40)
        assert nmi(t, p) == pytest.approx(nmi(p, t), abs=1e-12)
        assert ari(t, p) == pytest.approx(ari(p, t), abs=1e-12)
        renamed = np.array(["q", "r", "s", "t"])[p]
        assert nmi(t, renamed) == pytest.approx(nmi(t, p), abs=1e-12)
        assert ari(t, renamed) == pytest.approx(ari(t, p), abs=1e-12)
        perm = rng.permutation(4)
        assert accuracy(perm[t], perm[p]) == accuracy(t, p)


def test_ranges():
    rng = np.random.default_rng(2)
    for _ in range(30):
        t, p = rng.integers(0, 3, 25), rng.integers(0, 3, 25)
        assert 0.0 <= nmi(t, p) <= 1.0
        assert -1.0 <= ari(t, p) <= 1.0


def test_ari_monte_carlo_null():
    rng = np.random.default_rng(3)
    vals = [ari(rng.integers(0, 3, 200), rng.integers(0, 3, 200)) for _ in range(100)]
    assert abs(np.mean(vals)) <= 0.05


def test_score_examples():
    assert score_measure({"A": [0.3, 0.9, 0.5]}) == {"A": 3.0}
    s = score_measure({"A": [0.7, 0.8], "B": [0.7, 0.8]})
    assert s["A"] == s["B"] == 2.0
    s = score_measure({"A": [0.9, 0.8], "B": [0.45, 0.8]})
    assert s["A"] == pytest.approx(2.0) and s["B"] == pytest.approx(1.5)


def test_score_with_named_datasets():
    s = score_measure({"A": {"iris": 0.9, "wine": 0.8}, "B": {"wine": 0.8, "iris": 0.45}})
    assert s == pytest.approx({"A": 2.0, "B": 1.5})


def test_score_rejects_missing_cells():
    with pytest.raises(ValueError):
        score_measure({"A": [0.9, 0.8], "B": [0.5]})
    with pytest.raises(ValueError):
        score_measure({"A": {"iris": 0.9}, "B": {"wine": 0.5}})
    with pytest.raises(ValueError):
        score_measure({"A": [0.9, float("nan")]})
    with pytest.raises(ValueError):
        score_measure({"A": [0.9, 0.0]})
