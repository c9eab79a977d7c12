"""Macronode layout, dumbbell entangling, measurement plans, shift matrices.

A target graph state (one qubit per node, CZ edges) is compiled to a
passive architecture: every node of valence n becomes a macronode of n
modes fed by one dumbbell half per edge, fanned together by a beam
splitter network.  Measuring the n-1 satellite modes in position stitches
the dumbbells into the graph state on the central modes, up to known
outcome-dependent displacements.

The shift matrix propagates the raw homodyne record into canonical
outcomes: with ideal (noiseless) GKP inputs every canonical outcome is an
integer multiple of sqrt(pi), and the parity of the central multiple is
the qubit measurement outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import splitters as spl
from . import symplectic as sy

SQRT_PI = math.sqrt(math.pi)
BASIS_ANGLES = {"x": math.pi / 2.0, "y": math.pi / 4.0, "z": 0.0}


@dataclass(frozen=True)
class TargetGraph:
    """Simple unweighted graph with nodes 0..num_nodes-1."""

    num_nodes: int
    edges: tuple

    def __post_init__(self):
        seen = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.num_nodes and 0 <= b < self.num_nodes):
                raise ValueError(f"bad edge ({a}, {b})")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)

    @staticmethod
    def from_edges(num_nodes: int, edges) -> "TargetGraph":
        return TargetGraph(num_nodes, tuple((min(a, b), max(a, b)) for a, b in edges))

    def neighbors(self, node: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == node:
                out.append(b)
            elif b == node:
                out.append(a)
        return sorted(out)

    def valence(self, node: int) -> int:
        return len(self.neighbors(node))

    def bipartition(self) -> np.ndarray | None:
        """0/1 labels 2-coloring the graph, or None if not bipartite."""
        color = -np.ones(self.num_nodes, dtype=int)
        adj = [self.neighbors(v) for v in range(self.num_nodes)]
        for start in range(self.num_nodes):
            if color[start] >= 0:
                continue
            color[start] = 0
            stack = [start]
            while stack:
                v = stack.pop()
                for w in adj[v]:
                    if color[w] < 0:
                        color[w] = 1 - color[v]
                        stack.append(w)
                    elif color[w] == color[v]:
                        return None
        return color.astype(np.uint8)


@dataclass
class MacronodeLayout:
    """Physical mode bookkeeping for a macronized target graph.

    Mode numbering is deterministic: nodes in index order, each node's
    modes contiguous with slot 0 the central output and slots 1..n-1 the
    satellites; the dumbbell half for the edge to a node's k-th smallest
    neighbor enters input slot k.
    """

    graph: TargetGraph
    splitter_kind: str
    num_modes: int
    node_modes: list[list[int]]  # node -> physical modes by slot
    node_schedule: list[spl.BeamSplitterSchedule]
    node_reduction: list[spl.ReducedForm]
    dumbbells: list[tuple[int, int]]  # (A-half mode, B-half mode) per edge
    node_type: np.ndarray  # 0 = type A, 1 = type B (per node)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    def central_mode(self, node: int) -> int:
        return self.node_modes[node][0]

    def satellite_modes(self, node: int) -> list[int]:
        return self.node_modes[node][1:]

    def mode_node(self) -> np.ndarray:
        owner = np.zeros(self.num_modes, dtype=int)
        for node, modes in enumerate(self.node_modes):
            for m in modes:
                owner[m] = node
        return owner


def macronize(
    graph: TargetGraph,
    splitter_kind: str = "star",
    require_bipartite: bool = False,
) -> MacronodeLayout:
    """Expand a target graph into its macronode layout.

    ``require_bipartite`` must be set when rectangular (biased) GKP states
    are used, since dumbbell halves must then be typed consistently per
    node; a non-bipartite graph raises ValueError in that case.
    """
    part = graph.bipartition()
    if require_bipartite and part is None:
        raise ValueError("graph is not bipartite; A/B typing impossible")

    node_modes: list[list[int]] = []
    node_schedule = []
    node_reduction = []
    base = 0
    for node in range(graph.num_nodes):
        n = graph.valence(node)
        if n == 0:
            raise ValueError(f"node {node} has no edges; cannot macronize")
        node_modes.append(list(range(base, base + n)))
        base += n
        if splitter_kind == "two_pow":
            j = math.log2(n)
            if n > 1 and abs(j - round(j)) > 1e-12:
                raise ValueError(
                    f"two_pow splitter needs power-of-two valence, node {node} has {n}"
                )
        sched = spl.build_splitter(splitter_kind if n > 1 else "star", n)
        node_schedule.append(sched)
        node_reduction.append(spl.reduce_splitter(sched))

    if part is None:
        # Per-edge orientation: the lower-index endpoint holds the A half.
        node_type = np.zeros(graph.num_nodes, dtype=np.uint8)
    else:
        node_type = part

    dumbbells = []
    for a, b in graph.edges:
        slot_a = graph.neighbors(a).index(b)
        slot_b = graph.neighbors(b).index(a)
        mode_a = node_modes[a][slot_a]
        mode_b = node_modes[b][slot_b]
        if part is not None and node_type[a] == 1:
            mode_a, mode_b = mode_b, mode_a
        dumbbells.append((mode_a, mode_b))

    return MacronodeLayout(
        graph=graph,
        splitter_kind=splitter_kind,
        num_modes=base,
        node_modes=node_modes,
        node_schedule=node_schedule,
        node_reduction=node_reduction,
        dumbbells=dumbbells,
        node_type=node_type,
    )


# ---------------------------------------------------------------------------
# Entangler and canonical network pieces


def _scatter_blocks(local_mats, mode_maps, total: int) -> sp.csr_matrix:
    """Assemble one global symplectic from disjoint local dense symplectics.

    ``local_mats[i]`` is a 2n_i x 2n_i qqpp-ordered matrix acting on the
    modes ``mode_maps[i]``; supports must be pairwise disjoint.  Modes not
    covered get the identity.
    """
    rows, cols, vals = [], [], []
    covered = np.zeros(total, dtype=bool)
    for mat, modes in zip(local_mats, mode_maps):
        n = len(modes)
        covered[list(modes)] = True
        loc = np.asarray(mat, dtype=float)
        r, c = np.nonzero(loc)
        glob = np.asarray(
            [modes[i] if i < n else modes[i - n] + total for i in range(2 * n)]
        )
        rows.extend(glob[r])
        cols.extend(glob[c])
        vals.extend(loc[r, c])
    free = np.nonzero(~covered)[0]
    for m in free:
        rows.extend([m, m + total])
        cols.extend([m, m + total])
        vals.extend([1.0, 1.0])
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * total, 2 * total))


def dumbbell_entangler(layout: MacronodeLayout) -> sp.csr_matrix:
    """Physical dumbbell symplectic: per edge, balanced BS then F on the B half."""
    bs = sy.dense(sy.beam_splitter(0, 1, math.pi / 4.0, total=2))
    f = sy.dense(sy.rotation(math.pi / 2.0, 1, total=2))
    local = f @ bs
    return _scatter_blocks(
        [local] * len(layout.dumbbells), list(layout.dumbbells), layout.num_modes
    )


def dumbbell_cz_adjacency(layout: MacronodeLayout) -> sp.csr_matrix:
    """Unit-weight CZ adjacency of the dumbbells (canonical input picture)."""
    n = layout.num_modes
    if not layout.dumbbells:
        return sp.csr_matrix((n, n))
    xs, ys = zip(*layout.dumbbells)
    rows = list(xs) + list(ys)
    cols = list(ys) + list(xs)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def splitter_network(layout: MacronodeLayout) -> sp.csr_matrix:
    """Direct sum of all per-node splitter symplectics."""
    mats, maps = [], []
    for node in range(layout.num_nodes):
        sched = layout.node_schedule[node]
        if sched.n_modes > 1:
            mats.append(sy.dense(spl.splitter_symplectic(sched)))
            maps.append(layout.node_modes[node])
    return _scatter_blocks(mats, maps, layout.num_modes)


def star_cx_offdiag(layout: MacronodeLayout) -> sp.csr_matrix:
    """Strictly-off-diagonal part W of the star-CX q-block N = I + W.

    W routes centrals into satellites only, so W^2 = 0 and N^-1 = I - W.
    """
    rows, cols, vals = [], [], []
    for node in range(layout.num_nodes):
        red = layout.node_reduction[node]
        modes = layout.node_modes[node]
        for sat_slot, w in zip(red.satellites, red.weights):
            rows.append(modes[sat_slot])
            cols.append(modes[red.central])
            vals.append(float(w))
    n = layout.num_modes
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def star_cx_qblock(layout: MacronodeLayout) -> sp.csr_matrix:
    """q-block of the global star-CX network with the reduced weights."""
    n = layout.num_modes
    return sp.identity(n, format="csr") + star_cx_offdiag(layout)


def outcome_signs(layout: MacronodeLayout) -> np.ndarray:
    """Per-mode outcome sign gauge from the splitter reductions."""
    s = np.ones(layout.num_modes)
    for node in range(layout.num_nodes):
        red = layout.node_reduction[node]
        modes = layout.node_modes[node]
        for slot, sign in enumerate(red.signs):
            s[modes[slot]] = sign
    return s


def input_permutation(layout: MacronodeLayout) -> np.ndarray:
    """Global input-slot -> reduced-slot mode permutation (perm[j] = target)."""
    perm = np.arange(layout.num_modes)
    for node in range(layout.num_nodes):
        red = layout.node_reduction[node]
        modes = layout.node_modes[node]
        for j, pj in enumerate(red.perm):
            perm[modes[j]] = modes[pj]
    return perm


def canonical_cz_adjacency(layout: MacronodeLayout) -> sp.csr_matrix:
    """CZ adjacency of the stitched canonical picture.

    The dumbbell CZ network, relabeled by the splitter input permutations
    and the outcome sign gauge, conjugated through the inverse star-CX
    network:
        A_can = N^-T (Pi P A_DB P^T Pi) N^-1,  N = star-CX q-block.
    Entries are integers (+-1) whenever the reductions are canonical; the
    central-central block is the stitched graph adjacency.
    """
    a_db = dumbbell_cz_adjacency(layout)
    perm = input_permutation(layout)
    idx = np.argsort(perm)  # idx[target] = source
    n = layout.num_modes
    p_mat = sp.csr_matrix((np.ones(n), (np.arange(n), idx)), shape=(n, n))
    a_p = p_mat @ a_db @ p_mat.T
    s = sp.diags(outcome_signs(layout), format="csr")
    a_p = s @ a_p @ s
    w = star_cx_offdiag(layout)
    eye = sp.identity(n, format="csr")
    n_inv = eye - w
    out = (n_inv.T @ a_p @ n_inv).tocsr()
    out.data[np.abs(out.data) < 1e-12] = 0.0
    out.eliminate_zeros()
    return out


def stitched_graph_adjacency(layout: MacronodeLayout) -> np.ndarray:
    """Signed adjacency of the stitched graph state over the nodes."""
    a_can = canonical_cz_adjacency(layout)
    centrals = [layout.central_mode(v) for v in range(layout.num_nodes)]
    return a_can[centrals, :][:, centrals].toarray()


# ---------------------------------------------------------------------------
# Measurement plans


@dataclass(frozen=True)
class ModeMeasurement:
    mode: int
    theta: float  # physical homodyne angle: measure cos(t) q - sin(t) p
    rescale: float  # pre-Iwasawa squeeze factor absorbed in the outcome
    shear: float  # pre-Iwasawa shear (irrelevant to homodyne statistics)
    logical_angle: float  # canonical-frame angle realized by this setting


@dataclass
class MeasurementPlan:
    """Per-mode homodyne settings realizing per-node Pauli measurements."""

    layout: MacronodeLayout
    basis: list[str]  # per node: "x" | "y" | "z"
    alpha: float
    settings: list[ModeMeasurement] = field(default_factory=list)

    def angles(self) -> np.ndarray:
        th = np.zeros(self.layout.num_modes)
        for s in self.settings:
            th[s.mode] = s.theta
        return th


def _local_symplectic(alpha: float, type_b: bool) -> np.ndarray:
    """Symplectic of V^dag (type A) or F V^dag F^dag (type B), V = S(alpha)."""
    v_dag = sy.dense(sy.squeeze(1.0 / alpha))
    if not type_b:
        return v_dag
    f = sy.dense(sy.fourier())
    return f @ v_dag @ f.T


def measurement_plan(
    layout: MacronodeLayout, basis, alpha: float = 1.0
) -> MeasurementPlan:
    """Compute physical homodyne angles for the requested Pauli bases.

    Satellites absorb the local GKP shaping V (or F V F^dag); centrals
    additionally absorb the terminal splitter squeezing and the logical
    rotation, all via single-mode pre-Iwasawa factorization.
    """
    if isinstance(basis, str):
        basis = [basis] * layout.num_nodes
    if len(basis) != layout.num_nodes:
        raise ValueError("need one basis entry per node")
    for b in basis:
        if b not in BASIS_ANGLES:
            raise ValueError(f"unknown basis {b!r}")
    if alpha != 1.0 and layout.graph.bipartition() is None:
        raise ValueError("biased (alpha != 1) measurement needs a bipartite graph")

    settings = []
    for node in range(layout.num_nodes):
        type_b = bool(layout.node_type[node])
        local = _local_symplectic(alpha, type_b)
        red = layout.node_reduction[node]
        theta_l = BASIS_ANGLES[basis[node]]
        for slot, mode in enumerate(layout.node_modes[node]):
            if slot == red.central:
                s_mat = (
                    sy.dense(sy.rotation(theta_l))
                    @ sy.dense(sy.squeeze(1.0 / red.zeta))
                    @ local
                )
                target = theta_l
            else:
                s_mat = local
                target = 0.0
            fac = sy.pre_iwasawa(s_mat)
            settings.append(
                ModeMeasurement(
                    mode=mode,
                    theta=fac.beta,
                    rescale=fac.zeta,
                    shear=fac.sigma,
                    logical_angle=target,
                )
            )
    settings.sort(key=lambda s: s.mode)
    return MeasurementPlan(layout=layout, basis=list(basis), alpha=alpha, settings=settings)


# ---------------------------------------------------------------------------
# Shift matrix


def _rotation_network(layout: MacronodeLayout, angles: np.ndarray) -> sp.csr_matrix:
    mats = [sy.dense(sy.rotation(th)) for th in angles]
    maps = [[m] for m in range(layout.num_modes)]
    return _scatter_blocks(mats, maps, layout.num_modes)


def _local_network(layout: MacronodeLayout, alpha: float) -> sp.csr_matrix:
    if alpha == 1.0:
        return sy.identity(layout.num_modes)
    mats, maps = [], []
    for node in range(layout.num_nodes):
        mat = _local_symplectic(alpha, bool(layout.node_type[node]))
        for mode in layout.node_modes[node]:
            mats.append(mat)
            maps.append([mode])
    return _scatter_blocks(mats, maps, layout.num_modes)


def forward_network(layout: MacronodeLayout, plan: MeasurementPlan) -> sp.csr_matrix:
    """Physical symplectic from input displacements to the measured frame.

    S_RC S_AB S_split S_DB maps per-input-quadrature displacements of the
    qunaught modes to the rotated frame in which the homodyne record is the
    first M rows (the q slots).  S_DB here is the physical dumbbell
    entangler (Fourier + balanced beam splitter), whose 1/sqrt(2) turns the
    sqrt(2 pi) qunaught lattice into sqrt(pi)-lattice outcomes.
    """
    s_rc = _rotation_network(layout, plan.angles())
    s_ab = _local_network(layout, plan.alpha)
    s_split = splitter_network(layout)
    s_db = dumbbell_entangler(layout)
    return sp.csr_matrix(s_rc @ s_ab @ s_split @ s_db)


@dataclass
class ShiftMatrix:
    """Shift matrix and the index bookkeeping needed to read it out."""

    layout: MacronodeLayout
    plan: MeasurementPlan
    matrix: sp.csr_matrix  # 2M x 2M
    canonical_rows: np.ndarray  # per mode: row index of its canonical outcome

    def canonical_operator(self) -> sp.csr_matrix:
        """M x 2M map from the raw q-slot record to canonical outcomes."""
        return sp.csr_matrix(self.matrix[self.canonical_rows, :])


def shift_matrix(layout: MacronodeLayout, plan: MeasurementPlan) -> ShiftMatrix:
    """Assemble S_shift = S_L S_G S_CX S_DB^-1 S_split^-1 S_AB^-1 S_RC^-1.

    S_RC rotates raw outcomes into the all-position frame, S_AB undoes the
    local GKP shaping, S_split the splitters and S_DB the dumbbell CZ
    network; S_CX, S_G and S_L then re-apply the canonical star-CX, the
    stitched CZ network and the logical rotations.  Rows of the result
    belonging to measured canonical slots are supported on measured raw
    slots only, which is what makes processing of the masked record exact.
    """
    total = layout.num_modes
    s_rc = _rotation_network(layout, plan.angles())
    s_ab = _local_network(layout, plan.alpha)
    s_split = splitter_network(layout)
    s_db = sy.cz(dumbbell_cz_adjacency(layout))
    w = star_cx_offdiag(layout)
    eye = sp.identity(total, format="csr")
    # N = I + W with W^2 = 0, so N^-T = I - W^T exactly.
    s_cx = sp.bmat(
        [[eye + w, None], [None, eye - w.T]],
        format="csr",
    )
    s_g = sy.cz(canonical_cz_adjacency(layout))
    signs = outcome_signs(layout)
    s_flip = sp.diags(np.concatenate([signs, signs]), format="csr")
    logical_angles = np.zeros(total)
    for s in plan.settings:
        logical_angles[s.mode] = s.logical_angle
    s_l = _rotation_network(layout, logical_angles)

    m = (
        s_l
        @ s_g
        @ s_cx
        @ s_flip
        @ sy.symplectic_inverse(s_db)
        @ sy.symplectic_inverse(s_split)
        @ sy.symplectic_inverse(s_ab)
        @ sy.symplectic_inverse(s_rc)
    )
    m = sp.csr_matrix(m)
    m.data[np.abs(m.data) < 1e-12] = 0.0
    m.eliminate_zeros()
    canonical_rows = np.arange(total)  # q-slot of every mode
    return ShiftMatrix(layout=layout, plan=plan, matrix=m, canonical_rows=canonical_rows)


def raw_record(layout: MacronodeLayout, values: np.ndarray) -> np.ndarray:
    """Embed per-mode homodyne outcomes into a 2M displacement vector."""
    total = layout.num_modes
    out = np.zeros(2 * total)
    out[:total] = values
    return out


def process_outcomes(shift: ShiftMatrix, values: np.ndarray) -> np.ndarray:
    """Map raw homodyne outcomes to canonical outcomes (one per mode)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (shift.layout.num_modes,):
        raise ValueError("expected one raw outcome per mode")
    return shift.canonical_operator() @ raw_record(shift.layout, values)


def measured_support_defect(shift: ShiftMatrix) -> float:
    """Max |entry| of canonical rows on unmeasured (p) raw columns.

    Zero (to tolerance) certifies that canonical outcomes are computable
    from the homodyne record alone.
    """
    total = shift.layout.num_modes
    op = shift.canonical_operator()
    tail = op[:, total:]
    return float(np.max(np.abs(tail.data))) if tail.nnz else 0.0
