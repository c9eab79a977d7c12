"""CSS codes, the on-disk check-matrix format, and foliation into graphs.

A CSS code is stored as binary matrices H_X, H_Z (checks x qubits) with
H_X H_Z^T = 0 over GF(2), plus logical operator bases L_X, L_Z obeying
L_X L_Z^T = I_k.  ``foliate`` turns a code into the measurement graph of
a fault-tolerant memory: 2 * rounds + 1 alternating layers of data
qubits, with X-ancillas in even (primal) layers and Z-ancillas in odd
(dual) layers, data-data time edges between consecutive layers, and
ancilla-data edges given by the check supports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_HEADER = "css-code v1"


def gf2_rank(matrix: np.ndarray) -> int:
    """Rank of a binary matrix over GF(2) by Gaussian elimination."""
    m = (np.asarray(matrix) % 2).astype(np.uint8).copy()
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivot = None
        for r in range(rank, rows):
            if m[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = np.nonzero(m[:, col])[0]
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass(frozen=True)
class CssCode:
    """A CSS code with explicit logical bases."""

    name: str
    h_x: np.ndarray
    h_z: np.ndarray
    l_x: np.ndarray
    l_z: np.ndarray
    distance: int | None = None

    @property
    def n(self) -> int:
        return self.h_x.shape[1]

    @property
    def k(self) -> int:
        return self.l_x.shape[0]

    def validate(self) -> None:
        """Raise ValueError unless all CSS/logical invariants hold."""
        hx, hz = self.h_x % 2, self.h_z % 2
        lx, lz = self.l_x % 2, self.l_z % 2
        n = self.n
        for mat, label in ((hz, "H_Z"), (lx, "L_X"), (lz, "L_Z")):
            if mat.shape[1] != n:
                raise ValueError(f"{label} has {mat.shape[1]} columns, expected {n}")
        if np.any((hx @ hz.T) % 2):
            raise ValueError("H_X H_Z^T != 0 over GF(2)")
        k = n - gf2_rank(hx) - gf2_rank(hz)
        if lx.shape[0] != k or lz.shape[0] != k:
            raise ValueError(f"logical bases have wrong size: expected k={k}")
        if np.any((lx @ hz.T) % 2) or np.any((lz @ hx.T) % 2):
            raise ValueError("logicals do not commute with the checks")
        if np.any(((lx @ lz.T) % 2) != np.eye(k, dtype=np.uint8)):
            raise ValueError("L_X L_Z^T != I over GF(2)")

    def check_support(self, kind: str, index: int) -> np.ndarray:
        mat = self.h_x if kind == "x" else self.h_z
        return np.nonzero(mat[index] % 2)[0]


def toric_code(d: int) -> CssCode:
    """Non-rotated toric code on a periodic d x d lattice: [[2d^2, 2, d]].

    Qubits live on edges: horizontal edge h(r, c) between vertices (r, c)
    and (r, c+1), vertical edge v(r, c) between (r, c) and (r+1, c).
    X-checks are vertex stars, Z-checks are plaquettes.
    """
    if d < 2:
        raise ValueError("toric code needs d >= 2")
    n = 2 * d * d

    def h_idx(r, c):
        return (r % d) * d + (c % d)

    def v_idx(r, c):
        return d * d + (r % d) * d + (c % d)

    h_x = np.zeros((d * d, n), dtype=np.uint8)
    h_z = np.zeros((d * d, n), dtype=np.uint8)
    for r in range(d):
        for c in range(d):
            star = r * d + c
            h_x[star, h_idx(r, c)] ^= 1
            h_x[star, h_idx(r, c - 1)] ^= 1
            h_x[star, v_idx(r, c)] ^= 1
            h_x[star, v_idx(r - 1, c)] ^= 1
            plaq = r * d + c
            h_z[plaq, h_idx(r, c)] ^= 1
            h_z[plaq, h_idx(r + 1, c)] ^= 1
            h_z[plaq, v_idx(r, c)] ^= 1
            h_z[plaq, v_idx(r, c + 1)] ^= 1

    l_x = np.zeros((2, n), dtype=np.uint8)
    l_z = np.zeros((2, n), dtype=np.uint8)
    # X logicals are cycles on the dual lattice (fixed-column horizontal
    # edges / fixed-row vertical edges); Z logicals are primal cycles.
    for r in range(d):
        l_x[0, h_idx(r, 0)] = 1
        l_z[1, v_idx(r, 0)] = 1
    for c in range(d):
        l_x[1, v_idx(0, c)] = 1
        l_z[0, h_idx(0, c)] = 1
    code = CssCode(name=f"toric-{d}", h_x=h_x, h_z=h_z, l_x=l_x, l_z=l_z, distance=d)
    code.validate()
    return code


# ---------------------------------------------------------------------------
# File format


def save_code(code: CssCode, path: str | Path) -> None:
    """Write a code in the ``css-code v1`` text format."""
    lines = [FORMAT_HEADER]
    d = code.distance if code.distance is not None else 0
    lines.append(f"n={code.n} k={code.k} d={d} name={code.name}")
    for label, mat in (
        ("HX", code.h_x),
        ("HZ", code.h_z),
        ("LX", code.l_x),
        ("LZ", code.l_z),
    ):
        lines.append(label)
        for row in mat:
            lines.append(" ".join(str(i) for i in np.nonzero(row % 2)[0]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_code(path: str | Path) -> CssCode:
    """Read and validate a code in the ``css-code v1`` text format."""
    raw = Path(path).read_text().splitlines()
    lines = [ln.strip() for ln in raw if ln.strip() and not ln.strip().startswith("#")]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"bad header: expected {FORMAT_HEADER!r}")
    meta: dict[str, str] = {}
    for tok in lines[1].split():
        key, _, val = tok.partition("=")
        meta[key] = val
    try:
        n = int(meta["n"])
        k = int(meta["k"])
        dist = int(meta.get("d", "0"))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad metadata line: {lines[1]!r}") from exc
    name = meta.get("name", Path(path).stem)

    sections: dict[str, list[list[int]]] = {}
    current: list[list[int]] | None = None
    for ln in lines[2:]:
        if ln in ("HX", "HZ", "LX", "LZ"):
            current = sections.setdefault(ln, [])
        elif current is None:
            raise ValueError(f"row outside of any section: {ln!r}")
        else:
            try:
                current.append([int(t) for t in ln.split()])
            except ValueError as exc:
                raise ValueError(f"bad row: {ln!r}") from exc
    missing = {"HX", "HZ", "LX", "LZ"} - set(sections)
    if missing:
        raise ValueError(f"missing sections: {sorted(missing)}")

    def to_matrix(rows: list[list[int]]) -> np.ndarray:
        mat = np.zeros((len(rows), n), dtype=np.uint8)
        for i, row in enumerate(rows):
            for col in row:
                if not 0 <= col < n:
                    raise ValueError(f"column index {col} out of range [0, {n})")
                mat[i, col] ^= 1
        return mat

    code = CssCode(
        name=name,
        h_x=to_matrix(sections["HX"]),
        h_z=to_matrix(sections["HZ"]),
        l_x=to_matrix(sections["LX"]),
        l_z=to_matrix(sections["LZ"]),
        distance=dist or None,
    )
    if code.k != k:
        raise ValueError(f"declared k={k} but logical bases have {code.k} rows")
    code.validate()
    return code


# ---------------------------------------------------------------------------
# Foliation


@dataclass(frozen=True)
class FoliatedNode:
    layer: int
    role: str  # "data" | "anc_x" | "anc_z"
    index: int  # qubit or check index within the code


@dataclass
class FoliatedGraph:
    """Measurement graph of a foliated CSS-code memory.

    ``detectors[complex]`` lists, per detector, the node ids whose X-bit
    parities it sums; ``logical_supports[complex]`` gives, per logical,
    the data-node ids whose residual-parity decides the verdict.  The
    primal complex (index 0) is built from H_X, the dual (index 1) from
    H_Z.
    """

    code: CssCode
    rounds: int
    nodes: list[FoliatedNode]
    edges: list[tuple[int, int]]
    detectors: tuple[list[list[int]], list[list[int]]]
    logical_supports: tuple[list[list[int]], list[list[int]]]
    node_id: dict[tuple[int, str, int], int] = field(default_factory=dict)

    @property
    def num_layers(self) -> int:
        return 2 * self.rounds + 1

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def mechanisms(self, complex_index: int) -> list[int]:
        """Node ids whose bit flips the given complex can register."""
        out = []
        for nid, node in enumerate(self.nodes):
            if complex_index == 0:
                if node.role == "anc_x" or (node.role == "data" and node.layer % 2 == 1):
                    out.append(nid)
            else:
                if node.role == "anc_z" or (node.role == "data" and node.layer % 2 == 0):
                    out.append(nid)
        return out

    def bipartition(self) -> np.ndarray:
        """0/1 labels that 2-color the foliated graph (primal side = 1)."""
        labels = np.zeros(self.num_nodes, dtype=np.uint8)
        for nid, node in enumerate(self.nodes):
            if node.role == "anc_x" or (node.role == "data" and node.layer % 2 == 1):
                labels[nid] = 1
        return labels


def foliate(code: CssCode, rounds: int | None = None) -> FoliatedGraph:
    """Foliate a CSS code into a memory graph with open time boundaries.

    Layers 0..2*rounds alternate primal (even, X-ancillas) and dual (odd,
    Z-ancillas); every layer carries all data qubits.  Detectors compare
    ancilla outcomes two layers apart together with the sandwiched data
    outcomes; at the two time boundaries the dual complex gains
    single-ancilla detectors completed by the boundary-layer data bits.
    """
    if rounds is None:
        rounds = code.distance if code.distance else 3
    if rounds < 1:
        raise ValueError("need at least one round")
    layers = 2 * rounds + 1

    nodes: list[FoliatedNode] = []
    node_id: dict[tuple[int, str, int], int] = {}

    def add(layer: int, role: str, index: int) -> int:
        key = (layer, role, index)
        node_id[key] = len(nodes)
        nodes.append(FoliatedNode(layer, role, index))
        return node_id[key]

    for t in range(layers):
        for q in range(code.n):
            add(t, "data", q)
        if t % 2 == 0:
            for c in range(code.h_x.shape[0]):
                add(t, "anc_x", c)
        else:
            for c in range(code.h_z.shape[0]):
                add(t, "anc_z", c)

    edges: list[tuple[int, int]] = []
    for t in range(layers):
        if t % 2 == 0:
            for c in range(code.h_x.shape[0]):
                for q in code.check_support("x", c):
                    edges.append((node_id[(t, "anc_x", c)], node_id[(t, "data", q)]))
        else:
            for c in range(code.h_z.shape[0]):
                for q in code.check_support("z", c):
                    edges.append((node_id[(t, "anc_z", c)], node_id[(t, "data", q)]))
        if t + 1 < layers:
            for q in range(code.n):
                edges.append((node_id[(t, "data", q)], node_id[(t + 1, "data", q)]))

    primal: list[list[int]] = []
    for c in range(code.h_x.shape[0]):
        support = code.check_support("x", c)
        for t in range(0, layers - 2, 2):
            det = [node_id[(t, "anc_x", c)], node_id[(t + 2, "anc_x", c)]]
            det += [node_id[(t + 1, "data", q)] for q in support]
            primal.append(det)

    dual: list[list[int]] = []
    for c in range(code.h_z.shape[0]):
        support = code.check_support("z", c)
        dual.append(
            [node_id[(1, "anc_z", c)]] + [node_id[(0, "data", q)] for q in support]
        )
        for t in range(1, layers - 3, 2):
            det = [node_id[(t, "anc_z", c)], node_id[(t + 2, "anc_z", c)]]
            det += [node_id[(t + 1, "data", q)] for q in support]
            dual.append(det)
        dual.append(
            [node_id[(layers - 2, "anc_z", c)]]
            + [node_id[(layers - 1, "data", q)] for q in support]
        )

    primal_logicals: list[list[int]] = []
    for row in code.l_x % 2:
        support = np.nonzero(row)[0]
        primal_logicals.append(
            [node_id[(t, "data", q)] for t in range(1, layers, 2) for q in support]
        )
    dual_logicals: list[list[int]] = []
    for row in code.l_z % 2:
        support = np.nonzero(row)[0]
        dual_logicals.append(
            [node_id[(t, "data", q)] for t in range(0, layers, 2) for q in support]
        )

    return FoliatedGraph(
        code=code,
        rounds=rounds,
        nodes=nodes,
        edges=edges,
        detectors=(primal, dual),
        logical_supports=(primal_logicals, dual_logicals),
        node_id=node_id,
    )
