"""Inner binning, soft information, and outer matching."""

import itertools
import math

import numpy as np
import pytest

from gkpnet import decoder as dec
from gkpnet import engine, noise
from gkpnet import macronet as mn

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Inner level


def test_independent_bins_and_residuals():
    vals = np.array([0.0, 0.4 * SQRT_PI, 0.6 * SQRT_PI, -1.4 * SQRT_PI])
    bins = dec.independent_bins(vals)
    assert list(bins) == [0, 0, 1, -1]
    res = dec.residuals(vals, bins)
    assert np.all(np.abs(res) <= SQRT_PI / 2 + 1e-12)
    assert np.allclose(vals, SQRT_PI * bins + res)


def test_contributor_sets_partition(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    sets = dec.contributor_sets(pipeline.layout)
    flat = sorted(m for group in sets for m in group)
    assert flat == list(range(pipeline.layout.num_modes))
    for u, group in enumerate(sets):
        # Central mode first, one satellite per incident edge.
        assert group[0] == pipeline.layout.central_mode(u)
        assert len(group) == len(set(group))


def test_node_bits_parity_oracle(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    sets = dec.contributor_sets(pipeline.layout)
    rng = np.random.default_rng(3)
    bins = rng.integers(-4, 5, size=pipeline.layout.num_modes)
    bits = dec.node_bits(bins, pipeline.contrib)
    for u, group in enumerate(sets):
        assert bits[u] == sum(int(bins[m]) for m in group) % 2


def test_combine_probs_matrix_matches_scalar(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    sets = dec.contributor_sets(pipeline.layout)
    rng = np.random.default_rng(9)
    p = rng.uniform(0.0, 0.5, size=pipeline.layout.num_modes)
    combined = dec.combine_probs_matrix(p, pipeline.contrib)
    for u, group in enumerate(sets):
        assert combined[u] == pytest.approx(
            noise.combine_flip_probs(p[group]), abs=1e-12
        )


def test_correlated_bins_never_worse():
    # On each macronode block the correlated choice can only lower the
    # Mahalanobis distance of the residual.
    layout = mn.macronize(
        mn.TargetGraph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]),
        splitter_kind="star",
    )
    rng = np.random.default_rng(17)
    covs = []
    for u in range(layout.num_nodes):
        k = len(layout.node_modes[u])
        a = rng.normal(size=(k, k))
        covs.append(a @ a.T + 0.05 * np.eye(k))
    for _ in range(25):
        vals = rng.normal(scale=1.2, size=layout.num_modes)
        ind = dec.independent_bins(vals)
        cor = dec.correlated_bins(vals, layout, covs)
        for u in range(layout.num_nodes):
            modes = layout.node_modes[u]
            prec = np.linalg.inv(covs[u])
            r_i = np.array([vals[m] - SQRT_PI * ind[m] for m in modes])
            r_c = np.array([vals[m] - SQRT_PI * cor[m] for m in modes])
            assert r_c @ prec @ r_c <= r_i @ prec @ r_i + 1e-9


def test_correlated_bins_diagonal_matches_independent():
    layout = mn.macronize(
        mn.TargetGraph.from_edges(3, [(0, 1), (1, 2)]), splitter_kind="star"
    )
    covs = [
        0.05 * np.eye(len(layout.node_modes[u])) for u in range(layout.num_nodes)
    ]
    rng = np.random.default_rng(21)
    vals = rng.normal(scale=1.0, size=layout.num_modes)
    assert np.array_equal(
        dec.correlated_bins(vals, layout, covs), dec.independent_bins(vals)
    )


def test_node_flip_probs_bounds(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    rng = np.random.default_rng(33)
    vals = rng.normal(scale=1.0, size=pipeline.layout.num_modes)
    bins = dec.independent_bins(vals)
    var = np.full(pipeline.layout.num_modes, 0.1)
    p = dec.node_flip_probs(vals, bins, var, pipeline.contrib)
    assert np.all(p >= 0.0) and np.all(p <= 0.5 + 1e-12)
    # Larger variance cannot make any node more certain on average.
    p2 = dec.hard_flip_probs(4.0 * var, pipeline.contrib)
    p1 = dec.hard_flip_probs(var, pipeline.contrib)
    assert np.all(p2 >= p1 - 1e-12)


# ---------------------------------------------------------------------------
# Outer level


def synthetic_graph(rng, with_boundary):
    """Random small decoding graph shaped like a matchable complex."""
    nd = int(rng.integers(4, 9))
    mechanisms = []
    mech_detectors = []
    nid = 0
    # Bulk mechanisms between random detector pairs (connected backbone).
    for d in range(nd - 1):
        mechanisms.append(nid)
        mech_detectors.append((d, d + 1))
        nid += 1
    extra = int(rng.integers(2, 6))
    for _ in range(extra):
        a, b = rng.choice(nd, size=2, replace=False)
        mechanisms.append(nid)
        mech_detectors.append((int(min(a, b)), int(max(a, b))))
        nid += 1
    if with_boundary:
        for d in rng.choice(nd, size=2, replace=False):
            mechanisms.append(nid)
            mech_detectors.append((int(d),))
            nid += 1
    return dec.DecodingGraph(
        complex_index=0,
        num_detectors=nd,
        mechanisms=mechanisms,
        mech_detectors=mech_detectors,
        has_boundary=with_boundary,
    )


def brute_force_pairing_cost(pair_w, bdist, has_boundary):
    """Minimum total cost over all defect pairings (boundary allowed)."""
    k = pair_w.shape[0]

    def rec(free):
        if not free:
            return 0.0
        x = free[0]
        best = np.inf
        for y in free[1:]:
            rest = [v for v in free[1:] if v != y]
            best = min(best, pair_w[x, y] + rec(rest))
        if has_boundary:
            best = min(best, bdist[x] + rec(free[1:]))
        return best

    return rec(list(range(k)))


@pytest.mark.parametrize("seed", range(20))
def test_match_defects_cost_vs_brute_force(seed):
    rng = np.random.default_rng(seed)
    with_boundary = bool(seed % 2)
    graph = synthetic_graph(rng, with_boundary)
    ctx = dec.prepare_matching(graph)
    weights = rng.uniform(0.2, 6.0, size=len(graph.mechanisms))
    k = int(rng.integers(2, 7))
    if not with_boundary and k % 2 == 1:
        k += 1
    hot = rng.choice(graph.num_detectors, size=min(k, graph.num_detectors), replace=False)
    if not with_boundary and hot.size % 2 == 1:
        hot = hot[:-1]
    defects = np.zeros(graph.num_detectors, dtype=np.uint8)
    defects[hot] = 1
    correction = dec.match_defects(graph, defects, weights, ctx)
    # The correction must annihilate exactly the defect pattern.
    parity = np.zeros(graph.num_detectors, dtype=np.uint8)
    for pos, mech in enumerate(graph.mechanisms):
        if correction[mech]:
            for d in graph.mech_detectors[pos]:
                parity[d] ^= 1
    assert np.array_equal(parity, defects)
    # Matched cost is globally optimal: compare the blossom pairing cost
    # against exhaustive enumeration over all pairings.
    hot_ids, pair_w, bdist, _, _, _ = dec.defect_complete_graph(
        graph, defects, weights, ctx
    )
    want = brute_force_pairing_cost(pair_w, bdist, graph.has_boundary)
    got = correction_cost(graph, correction, weights)
    assert got == pytest.approx(want, abs=1e-9)


def correction_cost(graph, correction, weights):
    total = 0.0
    for pos, mech in enumerate(graph.mechanisms):
        if correction[mech]:
            total += weights[pos]
    return total


def test_match_defects_trivial_cases():
    rng = np.random.default_rng(5)
    graph = synthetic_graph(rng, True)
    ctx = dec.prepare_matching(graph)
    weights = np.ones(len(graph.mechanisms))
    out = dec.match_defects(
        graph, np.zeros(graph.num_detectors, dtype=np.uint8), weights, ctx
    )
    assert not out.any()


def test_match_defects_odd_closed_raises():
    graph = dec.DecodingGraph(
        complex_index=0,
        num_detectors=3,
        mechanisms=[0, 1, 2],
        mech_detectors=[(0, 1), (1, 2), (0, 2)],
        has_boundary=False,
    )
    defects = np.array([1, 0, 0], dtype=np.uint8)
    with pytest.raises(RuntimeError):
        dec.match_defects(graph, defects, np.ones(3))


def test_build_decoding_graph_toric(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    primal, dual = pipeline.graphs
    # Time boundaries open the primal complex; the dual is closed.
    assert primal.has_boundary
    assert not dual.has_boundary
    for g in (primal, dual):
        assert all(len(d) in (1, 2) for d in g.mech_detectors)
        assert len(g.mechanisms) == len(g.mech_detectors)


def test_mechanism_weights_monotone():
    graph = dec.DecodingGraph(
        complex_index=0,
        num_detectors=2,
        mechanisms=[0, 1],
        mech_detectors=[(0, 1), (0,)],
        has_boundary=True,
    )
    probs = np.array([0.4, 0.01])
    w = dec.mechanism_weights(probs, graph)
    assert w[0] < w[1]  # likelier flips are cheaper to use
    assert np.all(w > 0.0)
    w0 = dec.mechanism_weights(np.array([0.0, 1e-320]), graph)
    assert np.all(np.isfinite(w0))


def test_decode_complex_end_to_end(toric3_pipeline):
    # An error on a single mechanism produces defects the matcher undoes.
    pipeline, cfg = toric3_pipeline
    fg = pipeline.fg
    graph = pipeline.graphs[0]
    bits = np.zeros(fg.num_nodes, dtype=np.uint8)
    flip_probs = np.full(fg.num_nodes, 0.05)
    assert not dec.decode_complex(bits, flip_probs, fg, graph).any()
    bits[graph.mechanisms[7]] = 1
    assert not dec.decode_complex(bits, flip_probs, fg, graph).any()


def test_detector_matrix_consistency(toric3_pipeline):
    pipeline, _ = toric3_pipeline
    fg = pipeline.fg
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, size=fg.num_nodes).astype(np.uint8)
    for c in (0, 1):
        direct = dec.syndrome_defects(bits, fg, c)
        via_mat = dec.defects_from_bits(bits, pipeline.det_mats[c])
        assert np.array_equal(direct, via_mat)
