"""Noise model: channels, flip probabilities, soft information.

Statistical oracles use frozen seeds; closed-form values are checked
against independent quadrature/Monte-Carlo computations.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gkpnet import noise

SQRT_PI = math.sqrt(math.pi)


def flip_prob_quadrature(variance):
    """Independent oracle: integrate the N(0, K) density over odd cosets."""
    sd = math.sqrt(variance)

    def odd_mass(x):
        return stats.norm.pdf(x, scale=sd)

    total = 0.0
    span = max(10, int(12 * sd / SQRT_PI) + 2)
    for j in range(-span, span + 1):
        if j % 2 == 1 or j % 2 == -1:
            lo, hi = (j - 0.5) * SQRT_PI, (j + 0.5) * SQRT_PI
            val, _ = integrate.quad(odd_mass, lo, hi)
            total += val
    return total


def test_db_conversions():
    assert noise.epsilon_to_db(0.05) == pytest.approx(10.0)
    assert noise.db_to_epsilon(10.0) == pytest.approx(0.05)
    for db in (3.0, 10.95, 14.0):
        assert noise.epsilon_to_db(noise.db_to_epsilon(db)) == pytest.approx(db)
    assert noise.db_to_epsilon(0.0) == pytest.approx(noise.VACUUM_VARIANCE)


def test_grn_channel_shapes():
    x, y = noise.grn_channel(3, 0.1, 0.2)
    assert np.allclose(x, np.eye(6))
    assert np.allclose(y, np.diag([0.1] * 3 + [0.2] * 3))
    x, y = noise.grn_channel(2, 0.3)
    assert np.allclose(y, 0.3 * np.eye(4))


def test_transformed_noise_isotropic():
    sigma_a, sigma_b = noise.transformed_noise(0.2, 0.2, alpha=1.0)
    assert np.allclose(sigma_a, 0.2 * np.eye(2))
    assert np.allclose(sigma_b, 0.2 * np.eye(2))


def test_measured_variance_projections():
    sigma = np.diag([2.0, 5.0])
    assert noise.measured_variance(sigma, 0.0) == pytest.approx(2.0)
    assert noise.measured_variance(sigma, math.pi / 2) == pytest.approx(5.0)
    # Isotropic covariance is angle independent.
    iso = 0.7 * np.eye(2)
    for theta in (0.0, 0.4, 1.1, math.pi / 2):
        assert noise.measured_variance(iso, theta) == pytest.approx(0.7)


def test_canonical_covariance_structure():
    eps = 0.13
    for n in (2, 3, 4, 5):
        k = noise.canonical_covariance(n, eps)
        assert k.shape == (n, n)
        assert k[0, 0] == pytest.approx(n * eps)
        assert np.allclose(k[0, 1:], 0.0) and np.allclose(k[1:, 0], 0.0)
        sub = k[1:, 1:]
        assert np.allclose(np.diag(sub), 2.0 * eps)
        off = sub - np.diag(np.diag(sub))
        assert np.allclose(off[off != 0.0], eps)
        # Valid covariance: positive definite for eps > 0.
        assert np.all(np.linalg.eigvalsh(k) > 0.0)


@pytest.mark.parametrize("variance", [0.01, 0.05, 0.1, 0.25, 0.6])
def test_flip_prob_vs_quadrature_oracle(variance):
    assert noise.flip_prob(variance) == pytest.approx(
        flip_prob_quadrature(variance), abs=1e-12
    )


def test_flip_prob_limits_and_monotonicity():
    assert noise.flip_prob(0.0) == 0.0
    vals = [noise.flip_prob(v) for v in (0.01, 0.05, 0.1, 0.5, 2.0, 10.0)]
    assert all(0.0 <= v <= 0.5 for v in vals)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert noise.flip_prob(50.0) == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError):
        noise.flip_prob(-0.1)


def test_flip_prob_approx_leading_order():
    # The approximation keeps only the nearest odd interval; at small K it
    # overestimates by a vanishing relative margin.
    for v in (0.02, 0.05, 0.1):
        exact = noise.flip_prob(v)
        approx = noise.flip_prob_approx(v)
        assert approx >= exact - 1e-12
        assert approx == pytest.approx(exact, rel=0.05)


def test_ratio_anchor():
    # At -10 log10(2 eps) = 10.95 the ratios f(n eps) / (n f(2 eps)) are
    # 2.01, 3.82 and 5.43 for n = 3, 4, 5.
    eps = 10 ** (-10.95 / 10.0) / 2.0
    expected = {3: 2.01, 4: 3.82, 5: 5.43}
    for n, want in expected.items():
        ratio = noise.flip_prob(n * eps) / (n * noise.flip_prob(2.0 * eps))
        assert ratio == pytest.approx(want, abs=0.02)


def test_conditional_flip_prob_symmetry_points():
    for v in (0.02, 0.1, 0.3):
        # Halfway between cosets the posterior is exactly 1/2.
        assert noise.conditional_flip_prob(SQRT_PI / 2.0, v) == pytest.approx(0.5)
        assert noise.conditional_flip_prob(-SQRT_PI / 2.0, v) == pytest.approx(0.5)
        # On an even lattice point the flip is unlikely at small variance.
        assert noise.conditional_flip_prob(0.0, v) < 0.5
        # On an odd lattice point it is the mirror image.
        assert noise.conditional_flip_prob(SQRT_PI, v) == pytest.approx(
            1.0 - noise.conditional_flip_prob(0.0, v), abs=1e-12
        )
    assert noise.conditional_flip_prob(0.3, 0.0) == 0.0


def test_conditional_flip_prob_total_probability():
    # Averaging g over the outcome distribution recovers f (law of total
    # probability); Monte Carlo with a frozen seed at 4 sigma.
    rng = np.random.default_rng(421)
    for v in (0.04, 0.16):
        shifts = rng.normal(scale=math.sqrt(v), size=200_000)
        bins = np.round(shifts / SQRT_PI)
        res = shifts - SQRT_PI * bins
        g = noise.conditional_flip_prob_vec(res, np.full(res.size, v))
        flips = (np.abs(bins).astype(int) % 2).astype(float)
        diff = np.mean(flips - g)
        sigma = np.std(flips - g) / math.sqrt(res.size)
        assert abs(diff) <= 4.0 * sigma + 1e-12


@settings(max_examples=80, deadline=None)
@given(
    r=st.floats(-4.0, 4.0),
    v=st.floats(0.005, 1.5),
)
def test_conditional_vec_matches_scalar(r, v):
    vec = noise.conditional_flip_prob_vec(np.array([r]), np.array([v]))
    assert vec[0] == pytest.approx(noise.conditional_flip_prob(r, v), abs=1e-10)
    assert 0.0 <= vec[0] <= 1.0


def test_phase_error_bound_definition():
    assert noise.phase_error_bound(4, 3, 0.05) == pytest.approx(
        noise.flip_prob(0.2) + 3 * noise.flip_prob(0.1)
    )


def test_combine_flip_probs_small_cases():
    assert noise.combine_flip_probs(np.array([0.1])) == pytest.approx(0.1)
    p, q = 0.1, 0.3
    assert noise.combine_flip_probs(np.array([p, q])) == pytest.approx(
        p * (1 - q) + q * (1 - p)
    )
    assert noise.combine_flip_probs(np.array([0.5, 0.01])) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 0.5), min_size=1, max_size=6))
def test_combine_flip_probs_properties(probs):
    arr = np.array(probs)
    out = noise.combine_flip_probs(arr)
    assert 0.0 <= out <= 0.5 + 1e-12
    # Order independence.
    assert noise.combine_flip_probs(arr[::-1]) == pytest.approx(out)
    # Brute-force parity convolution oracle.
    odd = 0.0
    for mask in range(1 << len(probs)):
        weight = 1.0
        bits = 0
        for i, p in enumerate(probs):
            if mask >> i & 1:
                weight *= p
                bits += 1
            else:
                weight *= 1.0 - p
        if bits % 2 == 1:
            odd += weight
    assert out == pytest.approx(odd, abs=1e-9)
