"""Beam-splitter networks that fan a macronode out around a central mode.

A splitter couples the n modes of a macronode so that, once the n-1
satellite modes are measured in position, the whole network collapses to a
star of CX gates controlled by the central mode followed by a terminal
squeezing S(zeta) of the central mode.  Four constructions are provided:

* ``star``     -- all couplers touch the central mode directly,
* ``cascade``  -- a chain of couplers ending on the central mode,
* ``tree``     -- a balanced binary tree (depth ceil(log2 n)),
* ``two_pow``  -- all-balanced couplers, n a power of two; any mode can
  serve as the central mode.

With the tuned angles used here every construction reduces to uniform
star weights g = -1 and zeta = sqrt(n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import symplectic as sy

KINDS = ("star", "cascade", "tree", "two_pow")


@dataclass(frozen=True)
class BeamSplitterSchedule:
    """An ordered set of beam-splitter layers on modes 0..n_modes-1.

    Each layer is a list of ``(mode_a, mode_b, theta)`` couplers; couplers
    within one layer act on disjoint modes and therefore commute.  Layers
    are applied in list order.  ``central`` is the mode that carries the
    collapsed macronode qubit after satellite position measurements.
    """

    kind: str
    n_modes: int
    layers: tuple = ()
    central: int = 0

    def couplers(self):
        for layer in self.layers:
            for bs in layer:
                yield bs

    @property
    def num_couplers(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)


def build_splitter(kind: str, n: int, central: int = 0) -> BeamSplitterSchedule:
    """Build the tuned splitter schedule of the given kind over n modes."""
    if n < 1:
        raise ValueError("a splitter needs at least one mode")
    if kind not in KINDS:
        raise ValueError(f"unknown splitter kind {kind!r}; expected one of {KINDS}")
    if kind != "two_pow" and central != 0:
        raise ValueError(f"{kind} splitters support only central mode 0")

    layers: list[list[tuple[int, int, float]]] = []
    if kind == "star":
        for k in range(1, n):
            theta = -math.atan(math.sqrt(1.0 / k))
            layers.append([(0, k, theta)])
    elif kind == "cascade":
        for k in range(1, n):
            theta = -math.atan(math.sqrt(k))
            layers.append([(n - k, n - k - 1, theta)])
    elif kind == "tree":
        depth = max(1, math.ceil(math.log2(n))) if n > 1 else 0
        for level in range(1, depth + 1):
            half = 2 ** (level - 1)
            layer = []
            for k in range(0, n):
                a = (2 ** level) * k
                b = a + half
                if b >= n:
                    break
                c_sz = min(half, n - a)
                t_sz = min(half, n - b)
                theta = -math.atan(math.sqrt(t_sz / c_sz))
                layer.append((a, b, theta))
            if layer:
                layers.append(layer)
    else:  # two_pow
        j = int(round(math.log2(n)))
        if 2 ** j != n:
            raise ValueError("two_pow splitters require n to be a power of two")
        if not 0 <= central < n:
            raise ValueError("central mode out of range")
        for level in range(1, j + 1):
            half = 2 ** (level - 1)
            layer = []
            for k in range(n // (2 ** level)):
                for kp in range(half):
                    a = (2 ** level) * k + kp
                    layer.append((a, a + half, -math.pi / 4.0))
            layers.append(layer)

    sched = BeamSplitterSchedule(
        kind=kind, n_modes=n, layers=tuple(tuple(l) for l in layers), central=central
    )
    _check_layers(sched)
    return sched


def _check_layers(sched: BeamSplitterSchedule) -> None:
    for layer in sched.layers:
        seen: set[int] = set()
        for a, b, _theta in layer:
            if a == b or not (0 <= a < sched.n_modes and 0 <= b < sched.n_modes):
                raise ValueError(f"bad coupler ({a}, {b})")
            if a in seen or b in seen:
                raise ValueError("couplers within a layer must be disjoint")
            seen.update((a, b))


def q_block(sched: BeamSplitterSchedule) -> np.ndarray:
    """Dense n x n orthogonal q-block of the splitter network."""
    n = sched.n_modes
    m = np.eye(n)
    for a, b, theta in sched.couplers():
        c, s = math.cos(theta), math.sin(theta)
        ra, rb = m[a].copy(), m[b].copy()
        m[a] = c * ra - s * rb
        m[b] = s * ra + c * rb
    return m


def splitter_symplectic(
    sched: BeamSplitterSchedule,
    total: int | None = None,
    mode_map=None,
) -> sp.csr_matrix:
    """Sparse symplectic matrix of the splitter, optionally embedded.

    ``mode_map[j]`` gives the global mode index of schedule mode j; by
    default the schedule modes map to 0..n-1 of a ``total``-mode register.
    """
    n = sched.n_modes
    if mode_map is None:
        mode_map = list(range(n))
    if total is None:
        total = max(mode_map) + 1
    mloc = q_block(sched)
    rows, cols, vals = [], [], []
    for i in range(n):
        for jj in range(n):
            v = mloc[i, jj]
            if v != 0.0:
                gi, gj = mode_map[i], mode_map[jj]
                rows.extend([gi, gi + total])
                cols.extend([gj, gj + total])
                vals.extend([v, v])
    covered = set(mode_map)
    for mode in range(total):
        if mode not in covered:
            rows.extend([mode, mode + total])
            cols.extend([mode, mode + total])
            vals.extend([1.0, 1.0])
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * total, 2 * total))


@dataclass(frozen=True)
class ReducedForm:
    """Measurement-reduced form of a splitter.

    After position measurement of all satellite (non-central) output
    modes, the splitter is equivalent to the circuit

        S_central(zeta) o CX-star(weights) o (input permutation)

    ``perm[j]`` is the reduced slot occupied by input mode j (the central
    input slot maps to the central output).  ``weights[i]`` is the CX star
    weight onto satellite output mode ``satellites[i]``.  ``signs`` records
    the per-mode outcome sign gauge (-1 where the mode's classical record
    is negated) used to normalize the weights to be nonpositive and zeta
    positive.  ``canonical`` is True when all weights equal -1 and
    zeta = sqrt(n) to 1e-9.
    """

    n_modes: int
    central: int
    perm: tuple
    satellites: tuple
    weights: tuple
    zeta: float
    signs: tuple = ()

    @property
    def canonical(self) -> bool:
        return (
            max((abs(w + 1.0) for w in self.weights), default=0.0) <= 1e-9
            and abs(self.zeta - math.sqrt(self.n_modes)) <= 1e-9
        )

    def star_q_block(self) -> np.ndarray:
        """q-block of S(zeta) o CX-star o permutation on the reduced modes."""
        n = self.n_modes
        m = np.zeros((n, n))
        for j in range(n):
            m[self.perm[j], j] = 1.0
        star = np.eye(n)
        for sat, w in zip(self.satellites, self.weights):
            star[sat, self.central] = w
        z = np.eye(n)
        z[self.central, self.central] = self.zeta
        return z @ star @ m


def reduce_splitter(sched: BeamSplitterSchedule) -> ReducedForm:
    """Eliminate the satellite position measurements of a splitter.

    Gaussian elimination on the satellite rows of the q-block brings them
    to the form e_k + g e_j0 where j0 is the input slot routed to the
    central mode; the residual central row yields the terminal squeezing.
    Raises ValueError if the satellite block is singular (the network does
    not collapse to a star).
    """
    n = sched.n_modes
    c = sched.central
    m = q_block(sched)
    sat_rows = [i for i in range(n) if i != c]
    if not sat_rows:
        zeta = float(m[c, c])
        return ReducedForm(
            n, c, (0,), (), (), zeta=abs(zeta), signs=(1.0 if zeta >= 0 else -1.0,)
        )

    a_sat = m[sat_rows, :]

    def try_central_input(j0: int):
        cols = [j for j in range(n) if j != j0]
        sub = a_sat[:, cols]
        if abs(np.linalg.det(sub)) < 1e-9:
            return None
        inv = np.linalg.inv(sub)
        g_col = inv @ a_sat[:, j0]
        lam = m[c, cols] @ inv
        zeta = m[c, j0] - float(lam @ a_sat[:, j0])
        # rows of inv @ a_sat are e_cols[k] + g_col[k] e_j0 by construction;
        # perm: input cols[k] -> output sat_rows[k], input j0 -> central.
        perm = [0] * n
        perm[j0] = c
        for k, col in enumerate(cols):
            perm[col] = sat_rows[k]
        return perm, g_col, zeta

    result = try_central_input(c)
    if result is None:
        for j0 in sorted(range(n), key=lambda j: -abs(m[c, j])):
            if j0 == c:
                continue
            result = try_central_input(j0)
            if result is not None:
                break
    if result is None:
        raise ValueError("splitter q-block is singular after measurement elimination")
    perm, g_col, zeta = result
    # Each mode's outcome carries a sign gauge (measuring -q instead of q
    # merely negates the classical record).  Fix the gauge so star weights
    # are nonpositive and zeta positive, which makes every tuned
    # construction land on the uniform g = -1 form; the signs are kept so
    # that shift matrices can restore the physical relabeling exactly.
    signs = [1.0] * n
    if zeta < 0.0:
        signs[c] = -1.0
    for k, row in enumerate(sat_rows):
        if g_col[k] * signs[c] > 0.0:
            signs[row] = -1.0
    weights = tuple(-abs(float(g)) for g in g_col)
    return ReducedForm(
        n_modes=n,
        central=c,
        perm=tuple(perm),
        satellites=tuple(sat_rows),
        weights=weights,
        zeta=abs(float(zeta)),
        signs=tuple(signs),
    )


def tuned_angles(kind: str, n: int) -> list[float]:
    """Flat list of the tuned coupler angles, in application order."""
    return [theta for _a, _b, theta in build_splitter(kind, n).couplers()]
