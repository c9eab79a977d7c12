"""Symplectic-matrix toolbox for Gaussian circuits in qqpp ordering.

Quadrature vectors are ordered x = (q_1, ..., q_M, p_1, ..., p_M) with
hbar = 1, so the vacuum variance of each quadrature is 1/2.  A Gaussian
unitary U acts in the Heisenberg picture as U^dag x U = S x, and composing
circuits U_2 U_1 (U_1 applied first) gives the matrix product S_2 S_1.

Constructors return scipy sparse matrices (CSR); call ``dense`` when a
numpy array is required.  All matrices are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


def omega(num_modes: int) -> sp.csr_matrix:
    """Symplectic form Omega = [[0, I], [-I, 0]] in qqpp ordering."""
    eye = sp.identity(num_modes, format="csr")
    zero = sp.csr_matrix((num_modes, num_modes))
    return sp.bmat([[zero, eye], [-eye, zero]], format="csr")


def dense(matrix) -> np.ndarray:
    """Convert a (sparse or dense) matrix to a dense numpy array."""
    if sp.issparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix, dtype=float)


def num_modes_of(matrix) -> int:
    rows, cols = matrix.shape
    if rows != cols or rows % 2 != 0:
        raise ValueError(f"not a 2M x 2M matrix: shape {matrix.shape}")
    return rows // 2


def is_symplectic(matrix, tol: float = 1e-10) -> bool:
    """Check S Omega S^T = Omega to absolute tolerance ``tol``."""
    m = num_modes_of(matrix)
    s = dense(matrix)
    omg = dense(omega(m))
    return bool(np.max(np.abs(s @ omg @ s.T - omg)) <= tol)


def symplectic_inverse(matrix):
    """Inverse of a symplectic matrix, S^-1 = -Omega S^T Omega.

    Never forms a numerical inverse, so it is exact up to round-off even
    for badly conditioned (strongly squeezed) matrices.
    """
    m = num_modes_of(matrix)
    omg = omega(m)
    if sp.issparse(matrix):
        return (-omg @ matrix.T @ omg).tocsr()
    return dense(-omg @ sp.csr_matrix(matrix).T @ omg)


def compose(*factors):
    """Symplectic matrix of the circuit applying ``factors`` in order.

    ``compose(S1, S2, S3)`` corresponds to U_3 U_2 U_1, i.e. S3 @ S2 @ S1.
    """
    if not factors:
        raise ValueError("compose needs at least one factor")
    out = factors[0]
    for f in factors[1:]:
        out = f @ out
    return out


def apply_channel(sigma: np.ndarray, x_matrix, y_matrix) -> np.ndarray:
    """Covariance update of a Gaussian channel: Sigma -> X Sigma X^T + Y."""
    x = dense(x_matrix)
    return x @ np.asarray(sigma, dtype=float) @ x.T + dense(y_matrix)


def transform_displacement(matrix, z: np.ndarray) -> np.ndarray:
    """Propagate a displacement/outcome vector backwards: z -> S^-1 z."""
    return symplectic_inverse(matrix) @ np.asarray(z, dtype=float)


# ---------------------------------------------------------------------------
# Elementary Gaussian unitaries


def _embed(blocks: dict[tuple[int, int], np.ndarray], total: int) -> sp.csr_matrix:
    """Embed per-mode-pair 2x2 blocks (indexed (qp_row, qp_col)->block) ...

    ``blocks`` maps (mode_row, mode_col) to a 2x2 array [[qq, qp], [pq, pp]].
    Missing diagonal blocks default to the identity.
    """
    rows, cols, vals = [], [], []
    touched = set()
    for (a, b), blk in blocks.items():
        touched.add((a, a))
        touched.add((b, b))
        for i, roff in enumerate((0, total)):
            for j, coff in enumerate((0, total)):
                v = blk[i][j]
                if v != 0.0:
                    rows.append(a + roff)
                    cols.append(b + coff)
                    vals.append(float(v))
    covered = {a for (a, _b) in blocks}
    for m in range(total):
        if m not in covered:
            rows.extend([m, m + total])
            cols.extend([m, m + total])
            vals.extend([1.0, 1.0])
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * total, 2 * total))


def identity(total: int) -> sp.csr_matrix:
    return sp.identity(2 * total, format="csr")


def rotation(theta: float, mode: int = 0, total: int = 1) -> sp.csr_matrix:
    """Phase-space rotation R(theta): q -> cos(theta) q - sin(theta) p."""
    c, s = np.cos(theta), np.sin(theta)
    return _embed({(mode, mode): np.array([[c, -s], [s, c]])}, total)


def fourier(mode: int = 0, total: int = 1) -> sp.csr_matrix:
    """Fourier gate F = R(pi/2): q -> -p, p -> q."""
    return rotation(np.pi / 2.0, mode, total)


def squeeze(zeta: float, mode: int = 0, total: int = 1) -> sp.csr_matrix:
    """Squeezing S(zeta): q -> zeta q, p -> p / zeta."""
    if zeta == 0.0:
        raise ValueError("squeeze parameter must be nonzero")
    return _embed({(mode, mode): np.array([[zeta, 0.0], [0.0, 1.0 / zeta]])}, total)


def shear(sigma: float, mode: int = 0, total: int = 1) -> sp.csr_matrix:
    """Momentum shear P(sigma) = exp(i sigma q^2 / 2): p -> p + sigma q."""
    return _embed({(mode, mode): np.array([[1.0, 0.0], [sigma, 1.0]])}, total)


def cx(control: int, target: int, weight: float = 1.0, total: int = 2) -> sp.csr_matrix:
    """CX gate exp(-i g q_c p_t): q_t += g q_c, p_c -= g p_t."""
    if control == target:
        raise ValueError("control and target must differ")
    blocks = {
        (control, control): np.eye(2),
        (target, target): np.eye(2),
        (target, control): np.array([[weight, 0.0], [0.0, 0.0]]),
        (control, target): np.array([[0.0, 0.0], [0.0, -weight]]),
    }
    return _embed(blocks, total)


def cz(adjacency) -> sp.csr_matrix:
    """CZ network with symmetric weighted adjacency A: p -> p + A q."""
    if sp.issparse(adjacency):
        a = adjacency.tocsr().astype(float)
    else:
        a = sp.csr_matrix(np.asarray(adjacency, dtype=float))
    if (abs(a - a.T) > 1e-12).nnz:
        raise ValueError("CZ adjacency must be symmetric")
    n = a.shape[0]
    eye = sp.identity(n, format="csr")
    zero = sp.csr_matrix((n, n))
    return sp.bmat([[eye, zero], [a, eye]], format="csr")


def beam_splitter(mode_a: int, mode_b: int, theta: float, total: int) -> sp.csr_matrix:
    """Beam splitter B_ab(theta) = exp(-i theta (q_a p_b - p_a q_b)).

    Acts identically on the q and p blocks:
    q_a -> cos(theta) q_a - sin(theta) q_b, q_b -> sin(theta) q_a + cos(theta) q_b.
    """
    c, s = np.cos(theta), np.sin(theta)
    rot = {"aa": c, "ab": -s, "ba": s, "bb": c}
    blocks = {
        (mode_a, mode_a): np.diag([rot["aa"], rot["aa"]]),
        (mode_a, mode_b): np.diag([rot["ab"], rot["ab"]]),
        (mode_b, mode_a): np.diag([rot["ba"], rot["ba"]]),
        (mode_b, mode_b): np.diag([rot["bb"], rot["bb"]]),
    }
    return _embed(blocks, total)


def permutation(perm: np.ndarray, total: int | None = None) -> sp.csr_matrix:
    """Mode permutation: mode j is routed to mode perm[j] (q and p alike)."""
    perm = np.asarray(perm, dtype=int)
    n = perm.size
    if total is None:
        total = n
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("not a permutation")
    rows = np.concatenate([perm, perm + total])
    cols = np.concatenate([np.arange(n), np.arange(n) + total])
    vals = np.ones(2 * n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * total, 2 * total))


def passive_from_orthogonal(m_block: np.ndarray) -> sp.csr_matrix:
    """Passive symplectic I_2 (x) M acting identically on q and p blocks."""
    m = sp.csr_matrix(np.asarray(m_block, dtype=float))
    n = m.shape[0]
    zero = sp.csr_matrix((n, n))
    return sp.bmat([[m, zero], [zero, m]], format="csr")


# ---------------------------------------------------------------------------
# Factorizations


def _flip(mat: np.ndarray) -> np.ndarray:
    return mat[::-1, ::-1]


def ldu_factor(matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Factor M = P @ L @ D @ U with partial pivoting.

    P is a permutation matrix, L unit lower triangular, D diagonal (the
    pivots), U unit upper triangular.  Raises ValueError on singular input.
    """
    from scipy.linalg import lu

    m = dense(matrix)
    p, low, up = lu(m)
    d = np.diag(up).copy()
    if np.any(np.abs(d) < 1e-12 * max(1.0, np.max(np.abs(m)))):
        raise ValueError("matrix is singular; no LDU factorization")
    u_unit = up / d[:, None]
    return p, low, np.diag(d), u_unit


def udl_factor(matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Factor M = U @ D @ L @ P (permutation applied first).

    Companion of :func:`ldu_factor` with the triangular order reversed,
    obtained from an LU factorization of the index-reversed transpose.
    """
    from scipy.linalg import lu

    m = dense(matrix)
    p0, low0, up0 = lu(_flip(m).T)
    d0 = np.diag(up0).copy()
    if np.any(np.abs(d0) < 1e-12 * max(1.0, np.max(np.abs(m)))):
        raise ValueError("matrix is singular; no UDL factorization")
    u0_unit = up0 / d0[:, None]
    # flip(M).T = P0 L0 D0 U0  =>  M = flip(U0^T) flip(D0) flip(L0^T) flip(P0^T)
    u_unit = _flip(u0_unit.T)
    d_mat = np.diag(d0[::-1])
    l_unit = _flip(low0.T)
    p_mat = _flip(p0.T)
    return u_unit, d_mat, l_unit, p_mat


@dataclass(frozen=True)
class PreIwasawa:
    """Single-mode pre-Iwasawa factors: S = P(sigma) S(zeta) R(beta)."""

    sigma: float
    zeta: float
    beta: float

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            dense(shear(self.sigma)),
            dense(squeeze(self.zeta)),
            dense(rotation(self.beta)),
        )


def pre_iwasawa(matrix) -> PreIwasawa:
    """Pre-Iwasawa factorization of a single-mode symplectic matrix.

    Returns (sigma, zeta, beta) with zeta > 0 and beta in (-pi, pi] such
    that S = P(sigma) S(zeta) R(beta) exactly.
    """
    s = dense(matrix)
    if s.shape != (2, 2):
        raise ValueError("pre_iwasawa expects a single-mode (2x2) matrix")
    if abs(s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0] - 1.0) > 1e-9:
        raise ValueError("matrix is not symplectic (det != 1)")
    a, b = s[0, 0], s[0, 1]
    zeta = float(np.hypot(a, b))
    beta = float(np.arctan2(-b, a))
    if beta <= -np.pi:
        beta += 2.0 * np.pi
    sigma = float((a * s[1, 0] + b * s[1, 1]) / (zeta * zeta))
    return PreIwasawa(sigma=sigma, zeta=zeta, beta=beta)
