"""Gaussian random noise model and GKP error-probability formulas.

Noise is the isotropic (or quadrature-anisotropic) Gaussian random noise
channel: the covariance picks up an additive term while means are
untouched.  With hbar = 1 the vacuum variance is 1/2, and noise levels
are quoted either as a variance epsilon per quadrature or in decibels via
``db = -10 log10(eps / 0.5)``.

``flip_prob`` is the probability that a noisy GKP homodyne outcome with
variance K bins to the wrong logical coset; ``conditional_flip_prob``
upgrades it to the probability conditioned on the observed residual.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, erfc

from . import symplectic as sy

SQRT_PI = math.sqrt(math.pi)
VACUUM_VARIANCE = 0.5


def epsilon_to_db(eps: float) -> float:
    """Noise variance -> dB relative to vacuum (larger dB = less noise)."""
    if eps <= 0.0:
        raise ValueError("epsilon must be positive")
    return -10.0 * math.log10(eps / VACUUM_VARIANCE)


def db_to_epsilon(db: float) -> float:
    """dB relative to vacuum -> noise variance per quadrature."""
    return VACUUM_VARIANCE * 10.0 ** (-db / 10.0)


def grn_channel(num_modes: int, eps_q: float, eps_p: float | None = None):
    """(X, Y) matrices of the Gaussian-random-noise channel.

    X = I and Y = diag(eps_q, ..., eps_p, ...) in qqpp ordering.
    """
    if eps_p is None:
        eps_p = eps_q
    x = np.eye(2 * num_modes)
    y = np.diag([eps_q] * num_modes + [eps_p] * num_modes)
    return x, y


def transformed_noise(eps_q: float, eps_p: float, alpha: float = 1.0):
    """Per-mode noise covariances seen by the two dumbbell halves.

    For rectangular-lattice GKP states V|0> with V = S(alpha) the noise
    added before V is referred through V^-1 (type A) and through F V^-1
    (type B):

        Sigma_A = diag(eps_q / alpha^2, alpha^2 eps_p)
        Sigma_B = diag(alpha^2 eps_p, eps_q / alpha^2)
    """
    sigma = np.diag([eps_q, eps_p])
    v = sy.dense(sy.squeeze(alpha))
    v_inv = np.linalg.inv(v)
    sigma_a = v_inv @ sigma @ v_inv.T
    f = sy.dense(sy.fourier())
    sigma_b = f @ sigma_a @ f.T
    return sigma_a, sigma_b


def measured_variance(sigma2: np.ndarray, theta: float) -> float:
    """Variance of the rotated quadrature q_theta = cos q - sin p."""
    u = np.array([math.cos(theta), -math.sin(theta)])
    return float(u @ np.asarray(sigma2, dtype=float) @ u)


def canonical_covariance(n: int, eps: float) -> np.ndarray:
    """Covariance K of a macronode's canonical measurement outcomes.

    For a macronode of valence n under isotropic noise of variance eps the
    canonical central outcome (index 0) and the n-1 satellite outcomes have

        K = eps (I + A^2),  A = CX-star adjacency with unit weights,

    i.e. K_00 = n eps, K_ii = 2 eps, K_ij = eps (i != j >= 1), K_0i = 0.
    The result is independent of which splitter produced the macronode.
    """
    k = np.full((n, n), eps)
    np.fill_diagonal(k, 2.0 * eps)
    k[0, :] = 0.0
    k[:, 0] = 0.0
    k[0, 0] = n * eps
    return k


def flip_prob(variance: float, tol: float = 1e-18) -> float:
    """Probability that a N(0, K) shift leaves the correct GKP bin.

    The outcome lattice has spacing sqrt(pi); an error occurs when the
    shift lands in an odd coset.  Terms of the alternating interval sum
    below ``tol`` are truncated.
    """
    if variance < 0.0:
        raise ValueError("variance must be nonnegative")
    if variance == 0.0:
        return 0.0
    a = math.sqrt(math.pi / (2.0 * variance))
    # Include every even interval [(2j-1/2)sqrt(pi), (2j+1/2)sqrt(pi)] whose
    # probability mass exceeds tol.
    jmax = int(math.ceil((6.0 * math.sqrt(variance) / SQRT_PI + 1.0) / 2.0)) + 2
    while True:
        edge = (2.0 * jmax - 0.5) * a
        if edge > 9.0 or erfc(edge) < tol:
            break
        jmax += 1
    j = np.arange(-jmax, jmax + 1)
    mass = 0.5 * (erf((2 * j + 0.5) * a) - erf((2 * j - 0.5) * a))
    mass = mass[mass >= tol / 2.0]
    return float(min(max(1.0 - np.sum(mass), 0.0), 0.5))


def flip_prob_approx(variance: float) -> float:
    """Leading-order approximation erfc(sqrt(pi) / (2 sqrt(2K)))."""
    if variance == 0.0:
        return 0.0
    return float(erfc(SQRT_PI / (2.0 * math.sqrt(2.0 * variance))))


def conditional_flip_prob(residual: float, variance: float) -> float:
    """P(odd coset | observed residual r) for a N(0, K) shift.

    ``residual`` is the distance of the raw outcome from the nearest
    even-coset lattice point convention; the returned value is

        sum_j exp(-(r - (2j+1) sqrt(pi))^2 / 2K) / sum_j exp(-(r - j sqrt(pi))^2 / 2K).
    """
    if variance <= 0.0:
        return 0.0
    r = float(residual)
    jspan = int(math.ceil(8.0 * math.sqrt(variance) / SQRT_PI)) + 2
    center = int(round(r / SQRT_PI))
    j = np.arange(center - 2 * jspan, center + 2 * jspan + 1)
    logs = -((r - j * SQRT_PI) ** 2) / (2.0 * variance)
    m = np.max(logs)
    w = np.exp(logs - m)
    odd = np.sum(w[np.abs(j) % 2 == 1])
    return float(odd / np.sum(w))


def conditional_flip_prob_vec(residuals: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Vectorized :func:`conditional_flip_prob` over matching arrays."""
    r = np.asarray(residuals, dtype=float)
    v = np.asarray(variances, dtype=float)
    vmax = float(np.max(v)) if v.size else 0.0
    if vmax <= 0.0:
        return np.zeros_like(r)
    jspan = int(math.ceil(6.0 * math.sqrt(vmax) / SQRT_PI)) + 2
    center = np.round(r / SQRT_PI).astype(int)
    offs = np.arange(-jspan, jspan + 1)
    j = center[:, None] + offs[None, :]
    safe_v = np.where(v > 0.0, v, 1.0)
    logs = -((r[:, None] - j * SQRT_PI) ** 2) / (2.0 * safe_v[:, None])
    logs -= np.max(logs, axis=1, keepdims=True)
    w = np.exp(logs)
    odd = np.sum(np.where(np.abs(j) % 2 == 1, w, 0.0), axis=1)
    out = odd / np.sum(w, axis=1)
    return np.where(v > 0.0, out, 0.0)


def phase_error_bound(n: int, k: int, eps: float) -> float:
    """Union bound f(n eps) + k f(2 eps) on a canonical bit-flip.

    A canonical measurement of a valence-n macronode combines the central
    outcome (variance n eps) with k satellite outcomes (variance 2 eps
    each); the bound adds the individual flip probabilities.
    """
    return flip_prob(n * eps) + k * flip_prob(2.0 * eps)


def combine_flip_probs(probs: np.ndarray) -> float:
    """Probability that an odd number of independent flips occur."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, 0.5)
    return float(0.5 * (1.0 - np.prod(1.0 - 2.0 * p)))
