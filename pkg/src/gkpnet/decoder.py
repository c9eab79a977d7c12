"""Two-level decoding: GKP binning followed by minimum-weight matching.

The inner level turns continuous canonical outcomes into per-node parity
bits (with optional correlated binning and analog soft information); the
outer level matches syndrome defects on the primal/dual complexes of a
foliated code and returns a logical verdict per complex.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from . import noise
from ._blossom import min_weight_perfect_matching
from .codes import FoliatedGraph
from .macronet import MacronodeLayout, canonical_cz_adjacency

SQRT_PI = math.sqrt(math.pi)

# Weight assigned to a mechanism whose flip probability underflows; large
# enough to be avoided, small enough that sums stay finite.
_MAX_WEIGHT = 80.0


# ---------------------------------------------------------------------------
# Inner level: binning and soft information
# ---------------------------------------------------------------------------


def contributor_sets(layout: MacronodeLayout) -> list[list[int]]:
    """Canonical modes whose bins sum (mod 2) to each node's parity bit.

    Node ``u`` collects its own central mode plus every satellite mode that
    the canonical graph attaches to that central (one per incident edge,
    living on the neighbouring macronode).  Every mode contributes to
    exactly one node.
    """
    adj = canonical_cz_adjacency(layout).tocsr()
    centrals = [layout.central_mode(u) for u in range(layout.num_nodes)]
    central_set = set(centrals)
    out: list[list[int]] = []
    for u in range(layout.num_nodes):
        cu = centrals[u]
        row = adj.getrow(cu)
        sats = [
            int(j)
            for j, v in zip(row.indices, row.data)
            if abs(v) > 1e-9 and int(j) not in central_set
        ]
        out.append([cu] + sats)
    seen = sorted(m for group in out for m in group)
    if seen != list(range(layout.num_modes)):
        raise RuntimeError("contributor sets do not partition the modes")
    return out


def independent_bins(values: np.ndarray) -> np.ndarray:
    """Nearest sqrt(pi)-lattice index per outcome; ties go to the even bin."""
    return np.round(np.asarray(values, dtype=float) / SQRT_PI).astype(np.int64)


def residuals(values: np.ndarray, bins: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float) - SQRT_PI * bins


def correlated_bins(
    values: np.ndarray,
    layout: MacronodeLayout,
    block_covariances: list[np.ndarray],
    max_block: int = 8,
) -> np.ndarray:
    """Joint maximum-likelihood binning per macronode.

    Minimises the Mahalanobis distance of the residual over lattice offsets
    in {-1, 0, 1} per mode around the independent bins, using the canonical
    covariance of each macronode block [central, satellites].  The offset 0
    is always a candidate, so this is never worse than independent binning.
    Blocks larger than ``max_block`` fall back to coordinate descent.
    """
    return CorrelatedBinner(layout, block_covariances, max_block)(values)


class CorrelatedBinner:
    """Precomputed joint-ML binning for one layout and noise level.

    Blocks of equal size are grouped so one matrix product scores all
    3^k lattice offsets at once; the offset-only quadratic terms are
    computed once here, leaving only the linear cross terms per call.
    """

    def __init__(
        self,
        layout: MacronodeLayout,
        block_covariances: list[np.ndarray],
        max_block: int = 8,
    ):
        self.layout = layout
        self.block_covariances = block_covariances
        self.big_nodes = []
        self.groups = []
        by_size: dict[int, list[int]] = {}
        for u in range(layout.num_nodes):
            k = len(layout.node_modes[u])
            if 2 <= k <= max_block:
                by_size.setdefault(k, []).append(u)
            elif k > max_block:
                self.big_nodes.append(u)
        for k, nodes in sorted(by_size.items()):
            modes = np.array([layout.node_modes[u] for u in nodes])  # (N, k)
            prec = np.linalg.inv(
                np.array([block_covariances[u] for u in nodes])
            )
            # Candidate order matches itertools.product((-1, 0, 1), k), so
            # argmin tie-breaking is stable against the scalar reference.
            offsets = np.array(
                list(itertools.product((-1.0, 0.0, 1.0), repeat=k))
            )  # (C, k)
            # Score(n, c) = (r0 - s o_c)^T P_n (r0 - s o_c); the r0-only
            # term is constant per node, so only the linear and quadratic
            # offset terms decide the argmin.
            quad = math.pi * np.einsum("ci,nij,cj->nc", offsets, prec, offsets)
            self.groups.append((modes, prec, offsets, quad))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        bins = independent_bins(values)
        out = bins.copy()
        res = residuals(values, bins)
        for modes, prec, offsets, quad in self.groups:
            q = np.einsum("nij,nj->ni", prec, res[modes])  # (N, k)
            scores = quad - (2.0 * SQRT_PI) * (q @ offsets.T)
            best = offsets[np.argmin(scores, axis=1)].astype(np.int64)
            out[modes] = bins[modes] + best
        for u in self.big_nodes:
            _descent_bins(
                values, bins, out, self.layout, self.block_covariances, u
            )
        return out


def _descent_bins(values, bins, out, layout, block_covariances, u):
    """Coordinate-descent fallback for oversized blocks (in place)."""
    modes = layout.node_modes[u]
    k = len(modes)
    prec = np.linalg.inv(block_covariances[u])
    r0 = np.array([values[m] - SQRT_PI * bins[m] for m in modes])
    best = None
    best_d = None
    for offset in _descent_candidates(r0, prec, k):
        d = np.asarray(offset, dtype=float)
        r = r0 - SQRT_PI * d
        score = float(r @ prec @ r)
        if best_d is None or score < best_d - 1e-12:
            best_d = score
            best = offset
    for m, d in zip(modes, best):
        out[m] = bins[m] + d


def _descent_candidates(r0, prec, k):
    """Greedy single-coordinate candidates for oversized blocks."""
    yield tuple([0] * k)
    current = [0] * k
    for _ in range(k):
        base = r0 - SQRT_PI * np.asarray(current, dtype=float)
        base_score = float(base @ prec @ base)
        improved = False
        for i in range(k):
            for step in (-1, 1):
                trial = list(current)
                trial[i] += step
                r = r0 - SQRT_PI * np.asarray(trial, dtype=float)
                if float(r @ prec @ r) < base_score - 1e-12:
                    current = trial
                    improved = True
                    yield tuple(current)
                    break
            if improved:
                break
        if not improved:
            break


def contributor_matrix(
    contributors: list[list[int]], num_modes: int
) -> sp.csr_matrix:
    """0/1 node-by-mode incidence matrix of the contributor sets."""
    rows = [u for u, modes in enumerate(contributors) for _ in modes]
    cols = [m for modes in contributors for m in modes]
    vals = np.ones(len(cols))
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(contributors), num_modes)
    )


def node_bits(bins: np.ndarray, contrib: sp.csr_matrix) -> np.ndarray:
    """Per-node parity bit: sum of contributing lattice indices mod 2."""
    return (np.asarray(contrib @ bins).ravel().astype(np.int64) & 1).astype(
        np.uint8
    )


def combine_probs_matrix(
    mode_probs: np.ndarray, contrib: sp.csr_matrix
) -> np.ndarray:
    """Odd-parity combination of per-mode flip probabilities, per node."""
    p = np.clip(mode_probs, 0.0, 0.5)
    with np.errstate(divide="ignore"):
        # p = 1/2 yields -inf, which exp() correctly maps to zero.
        log_terms = np.log1p(-2.0 * p)
    combined = 0.5 * (1.0 - np.exp(np.asarray(contrib @ log_terms).ravel()))
    return np.clip(combined, 0.0, 0.5)


def node_flip_probs(
    values: np.ndarray,
    bins: np.ndarray,
    variances: np.ndarray,
    contrib: sp.csr_matrix,
) -> np.ndarray:
    """Analog soft information: probability that each node bit is wrong.

    Each contributing mode's conditional flip probability (given its
    residual and canonical variance) is combined under odd-parity error
    propagation.
    """
    res = residuals(values, bins)
    mode_p = noise.conditional_flip_prob_vec(res, variances)
    return combine_probs_matrix(mode_p, contrib)


def hard_flip_probs(variances: np.ndarray, contrib: sp.csr_matrix) -> np.ndarray:
    """Outcome-independent flip probabilities (no analog information)."""
    mode_p = np.array([noise.flip_prob(v) for v in variances])
    return combine_probs_matrix(mode_p, contrib)


# ---------------------------------------------------------------------------
# Outer level: matching on the primal/dual complexes
# ---------------------------------------------------------------------------


@dataclass
class DecodingGraph:
    """Static matching structure for one complex of a foliated graph.

    ``mech_detectors[i]`` lists the detectors flipped by mechanism node
    ``mechanisms[i]`` — two in the bulk, one next to an open boundary (the
    primal complex), in which case the edge runs to a virtual boundary
    vertex with index ``num_detectors``.
    """

    complex_index: int
    num_detectors: int
    mechanisms: list[int]
    mech_detectors: list[tuple[int, ...]]
    has_boundary: bool

    @property
    def boundary(self) -> int:
        return self.num_detectors

    @property
    def num_vertices(self) -> int:
        return self.num_detectors + (1 if self.has_boundary else 0)


def build_decoding_graph(fg: FoliatedGraph, complex_index: int) -> DecodingGraph:
    det_of_node: dict[int, list[int]] = {}
    detectors = fg.detectors[complex_index]
    for d, members in enumerate(detectors):
        for nid in members:
            det_of_node.setdefault(nid, []).append(d)
    mechanisms = fg.mechanisms(complex_index)
    mech_detectors: list[tuple[int, ...]] = []
    has_boundary = False
    for nid in mechanisms:
        dets = tuple(det_of_node.get(nid, ()))
        if len(dets) > 2:
            raise RuntimeError(
                f"mechanism {nid} flips {len(dets)} detectors; complexes must "
                "be graph-like"
            )
        if len(dets) == 1:
            has_boundary = True
        mech_detectors.append(dets)
    return DecodingGraph(
        complex_index=complex_index,
        num_detectors=len(detectors),
        mechanisms=mechanisms,
        mech_detectors=mech_detectors,
        has_boundary=has_boundary,
    )


def detector_matrix(fg: FoliatedGraph, complex_index: int) -> sp.csr_matrix:
    """0/1 detector-by-node incidence matrix of one complex."""
    dets = fg.detectors[complex_index]
    rows = [d for d, members in enumerate(dets) for _ in members]
    cols = [n for members in dets for n in members]
    vals = np.ones(len(cols))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(dets), fg.num_nodes))


def defects_from_bits(bits: np.ndarray, det_mat: sp.csr_matrix) -> np.ndarray:
    return (np.asarray(det_mat @ bits).ravel().astype(np.int64) & 1).astype(
        np.uint8
    )


def syndrome_defects(
    bits: np.ndarray, fg: FoliatedGraph, complex_index: int
) -> np.ndarray:
    """Detector parities of the measured bits (0 in the noiseless case)."""
    return defects_from_bits(bits, detector_matrix(fg, complex_index))


def mechanism_weights(flip_probs: np.ndarray, graph: DecodingGraph) -> np.ndarray:
    """Log-likelihood matching weights -log(p/(1-p)) per mechanism."""
    p = np.clip(flip_probs[graph.mechanisms], 1e-300, 0.5)
    w = -np.log(p / (1.0 - p))
    return np.minimum(w, _MAX_WEIGHT)


@dataclass
class MatchContext:
    """Weight-independent structure of one complex's matching problem.

    Built once; per trial only the mechanism weights change, so the sparse
    detector graph keeps its sparsity pattern and just refreshes its data.
    """

    graph: DecodingGraph
    edge_a: np.ndarray  # per detector-graph edge: endpoint detectors
    edge_b: np.ndarray
    mech_pos: np.ndarray  # mechanism positions that carry detectors
    mech_edge: np.ndarray  # their detector-graph edge id
    mat: sp.csr_matrix  # template; data refreshed per trial
    data_edge: np.ndarray  # edge id of every csr data slot
    edge_of_pair: dict  # (min(a,b), max(a,b)) -> edge id

    def weighted(self, weights: np.ndarray):
        """Edge weights, lightest mechanism per edge, weighted csr."""
        num_edges = self.edge_a.size
        w = weights[self.mech_pos]
        edge_w = np.full(num_edges, np.inf)
        np.minimum.at(edge_w, self.mech_edge, w)
        # Deterministic representative: lowest mechanism position that
        # attains the minimum on its edge.
        hit = w <= edge_w[self.mech_edge]
        best_pos = np.full(num_edges, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best_pos, self.mech_edge[hit], self.mech_pos[hit])
        mat = self.mat.copy()
        mat.data = edge_w[self.data_edge]
        return edge_w, best_pos, mat


def prepare_matching(graph: DecodingGraph) -> MatchContext:
    n = graph.num_vertices
    edge_of_pair: dict[tuple[int, int], int] = {}
    edge_pairs: list[tuple[int, int]] = []
    mech_pos, mech_edge = [], []
    for i, dets in enumerate(graph.mech_detectors):
        if not dets:
            continue
        if len(dets) == 2:
            a, b = dets
        else:
            a, b = dets[0], graph.boundary
        key = (min(a, b), max(a, b))
        if key not in edge_of_pair:
            edge_of_pair[key] = len(edge_pairs)
            edge_pairs.append(key)
        mech_pos.append(i)
        mech_edge.append(edge_of_pair[key])
    edge_a = np.array([p[0] for p in edge_pairs], dtype=np.int64)
    edge_b = np.array([p[1] for p in edge_pairs], dtype=np.int64)
    eids = np.arange(edge_a.size)
    rows = np.concatenate([edge_a, edge_b])
    cols = np.concatenate([edge_b, edge_a])
    vals = np.concatenate([eids, eids]).astype(float)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    data_edge = mat.data.astype(np.int64)
    return MatchContext(
        graph=graph,
        edge_a=edge_a,
        edge_b=edge_b,
        mech_pos=np.array(mech_pos, dtype=np.int64),
        mech_edge=np.array(mech_edge, dtype=np.int64),
        mat=mat,
        data_edge=data_edge,
        edge_of_pair=edge_of_pair,
    )


def defect_complete_graph(
    graph: DecodingGraph,
    defects: np.ndarray,
    weights: np.ndarray,
    ctx: MatchContext,
):
    """Shortest-path complete graph over the hot defects.

    Returns ``(hot, pair_w, bdist, use_boundary, best_pos, pred)``.
    ``pair_w[i, j]`` is the lightest connection between defects ``i`` and
    ``j`` — the direct shortest path, or the route through the boundary
    when that is cheaper; ``bdist`` holds each defect's distance to the
    boundary (zeros on a closed complex) and ``pred`` the dijkstra
    predecessor rows for path reconstruction.
    """
    hot = np.nonzero(defects)[0]
    _, best_pos, mat = ctx.weighted(weights)
    dist, pred = dijkstra(
        mat, directed=False, indices=hot, return_predecessors=True
    )
    k = hot.size
    pair_w = dist[:, hot]
    if graph.has_boundary:
        bdist = dist[:, graph.boundary]
        via_boundary = bdist[:, None] + bdist[None, :]
        use_boundary = via_boundary < pair_w
        pair_w = np.minimum(pair_w, via_boundary)
    else:
        bdist = np.zeros(k)
        use_boundary = np.zeros((k, k), dtype=bool)
    return hot, pair_w, bdist, use_boundary, best_pos, pred


def match_defects(
    graph: DecodingGraph,
    defects: np.ndarray,
    weights: np.ndarray,
    ctx: MatchContext | None = None,
) -> np.ndarray:
    """Most-likely correction via exact minimum-weight perfect matching.

    Returns a 0/1 vector over the foliated graph's nodes marking the
    mechanisms flipped by the correction.  A complete graph over the
    defects is built by shortest-path search from each defect; with an
    open boundary a defect pair may route through the virtual boundary
    vertex (weight d(a,B) + d(b,B)), and an odd defect count adds one
    virtual defect sitting on the boundary.
    """
    hot = np.nonzero(defects)[0]
    max_node = max(graph.mechanisms, default=-1) + 1
    correction = np.zeros(max_node, dtype=np.uint8)
    if hot.size == 0:
        return correction
    if hot.size % 2 == 1 and not graph.has_boundary:
        raise RuntimeError("odd defect count on a closed complex")

    if ctx is None:
        ctx = prepare_matching(graph)
    hot, pair_w, bdist, use_boundary, best_pos, pred = defect_complete_graph(
        graph, defects, weights, ctx
    )
    k = hot.size

    num = k + (k % 2)  # one extra virtual defect when the count is odd
    virt = k if k % 2 == 1 else -1
    iu, ju = np.triu_indices(k, 1)
    ei = iu
    ej = ju
    ew = pair_w[iu, ju]
    if virt >= 0:
        ei = np.concatenate([ei, np.arange(k)])
        ej = np.concatenate([ej, np.full(k, virt)])
        ew = np.concatenate([ew, bdist])
    mate = min_weight_perfect_matching(ei, ej, ew.astype(float), num)

    for x in range(num):
        y = int(mate[x])
        if y < x:
            continue
        if y == virt:
            x, y = y, x
        if x == virt:
            _apply_path(
                correction, ctx, best_pos, pred[y], int(hot[y]), graph.boundary
            )
            continue
        if use_boundary[x, y]:
            _apply_path(
                correction, ctx, best_pos, pred[x], int(hot[x]), graph.boundary
            )
            _apply_path(
                correction, ctx, best_pos, pred[y], int(hot[y]), graph.boundary
            )
        else:
            _apply_path(
                correction, ctx, best_pos, pred[x], int(hot[x]), int(hot[y])
            )
    return correction


def _apply_path(correction, ctx, best_pos, pred_row, source, target):
    node = target
    while node != source:
        prev = int(pred_row[node])
        if prev < 0:
            raise RuntimeError("matched defects are disconnected")
        edge = ctx.edge_of_pair[(min(prev, node), max(prev, node))]
        mech = ctx.graph.mechanisms[int(best_pos[edge])]
        correction[mech] ^= 1
        node = prev


def logical_parities(
    bits: np.ndarray,
    correction: np.ndarray,
    fg: FoliatedGraph,
    complex_index: int,
) -> np.ndarray:
    """Corrected logical outcomes (one parity per logical operator)."""
    supports = fg.logical_supports[complex_index]
    out = np.zeros(len(supports), dtype=np.uint8)
    for i, support in enumerate(supports):
        total = 0
        for nid in support:
            total += int(bits[nid])
            if nid < correction.size:
                total += int(correction[nid])
        out[i] = total % 2
    return out


def decode_complex(
    bits: np.ndarray,
    flip_probs: np.ndarray,
    fg: FoliatedGraph,
    graph: DecodingGraph,
) -> np.ndarray:
    """Bits + soft info -> corrected logical parities for one complex."""
    defects = syndrome_defects(bits, fg, graph.complex_index)
    weights = mechanism_weights(flip_probs, graph)
    correction = match_defects(graph, defects, weights)
    return logical_parities(bits, correction, fg, graph.complex_index)
