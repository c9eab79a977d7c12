"""Blossom matching against networkx and brute-force oracles."""

import itertools

import networkx as nx
import numpy as np
import pytest

from gkpnet._blossom import max_weight_matching, min_weight_perfect_matching


def random_instance(rng, n, density):
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < density
    ]
    w = rng.uniform(0.1, 10.0, size=len(edges))
    return edges, w


def matching_weight(mate, ei, ej, ew):
    lut = {}
    for a, b, w in zip(ei, ej, ew):
        lut[(min(a, b), max(a, b))] = w
    total = 0.0
    count = 0
    for x in range(mate.size):
        y = int(mate[x])
        if y > x:
            total += lut[(x, y)]
            count += 1
    return total, count


def brute_force_min_perfect(n, ei, ej, ew):
    lut = {}
    for a, b, w in zip(ei, ej, ew):
        lut[(min(a, b), max(a, b))] = min(w, lut.get((min(a, b), max(a, b)), np.inf))

    best = [np.inf]

    def rec(free, acc):
        if acc >= best[0]:
            return
        if not free:
            best[0] = acc
            return
        x = free[0]
        for y in free[1:]:
            w = lut.get((x, y))
            if w is not None:
                rec([v for v in free[1:] if v != y], acc + w)

    rec(list(range(n)), 0.0)
    return best[0]


@pytest.mark.parametrize("seed", range(12))
def test_max_weight_matching_vs_networkx(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 14))
    edges, w = random_instance(rng, n, 0.5)
    if not edges:
        return
    for maxcard in (False, True):
        ei = np.array([e[0] for e in edges])
        ej = np.array([e[1] for e in edges])
        mate = max_weight_matching(ei, ej, w, n, maxcardinality=maxcard)
        got_w, got_c = matching_weight(mate, ei, ej, w)
        g = nx.Graph()
        for (a, b), weight in zip(edges, w):
            g.add_edge(a, b, weight=weight)
        ref = nx.max_weight_matching(g, maxcardinality=maxcard)
        ref_w = sum(g[a][b]["weight"] for a, b in ref)
        assert got_c == len(ref)
        assert got_w == pytest.approx(ref_w, abs=1e-9)


@pytest.mark.parametrize("seed", range(15))
def test_min_weight_perfect_vs_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 5)) * 2  # even vertex count
    iu, ju = np.triu_indices(n, 1)
    ew = rng.uniform(0.1, 10.0, size=iu.size)
    mate = min_weight_perfect_matching(iu, ju, ew, n)
    assert np.all(mate >= 0)
    got, count = matching_weight(mate, iu, ju, ew)
    assert count == n // 2
    assert got == pytest.approx(brute_force_min_perfect(n, iu, ju, ew), abs=1e-9)


def test_min_weight_perfect_sparse_graph():
    # A path graph has a unique perfect matching regardless of weights.
    n = 6
    ei = np.arange(n - 1)
    ej = np.arange(1, n)
    ew = np.array([5.0, 1.0, 4.0, 1.0, 5.0])
    mate = min_weight_perfect_matching(ei, ej, ew, n)
    assert [int(m) for m in mate] == [1, 0, 3, 2, 5, 4]


def test_min_weight_perfect_raises_when_impossible():
    # Odd vertex count cannot be perfectly matched.
    with pytest.raises(ValueError):
        min_weight_perfect_matching(np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]), 3)
    # Disconnected pair with no edge.
    with pytest.raises(ValueError):
        min_weight_perfect_matching(np.array([0]), np.array([1]), np.array([1.0]), 4)


def test_zero_and_negative_weights():
    # max_weight_matching leaves negative-gain edges unmatched unless
    # cardinality is forced.
    ei = np.array([0, 2])
    ej = np.array([1, 3])
    ew = np.array([-1.0, 2.0])
    mate = max_weight_matching(ei, ej, ew, 4, maxcardinality=False)
    assert int(mate[0]) == -1 and int(mate[1]) == -1
    assert int(mate[2]) == 3
    mate = max_weight_matching(ei, ej, ew, 4, maxcardinality=True)
    assert int(mate[0]) == 1 and int(mate[2]) == 3


def test_blossom_heavy_structure():
    # Odd cycles force blossom shrinking; compare against networkx.
    rng = np.random.default_rng(77)
    n = 9
    edges = [(i, (i + 1) % n) for i in range(n)]
    edges += [(0, 4), (2, 6), (1, 5)]
    w = rng.uniform(1.0, 5.0, size=len(edges))
    ei = np.array([e[0] for e in edges])
    ej = np.array([e[1] for e in edges])
    mate = max_weight_matching(ei, ej, w, n, maxcardinality=True)
    got_w, got_c = matching_weight(mate, ei, ej, w)
    g = nx.Graph()
    for (a, b), weight in zip(edges, w):
        g.add_edge(a, b, weight=weight)
    ref = nx.max_weight_matching(g, maxcardinality=True)
    assert got_c == len(ref)
    assert got_w == pytest.approx(
        sum(g[a][b]["weight"] for a, b in ref), abs=1e-9
    )
