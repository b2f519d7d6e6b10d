"""Closed-form constants against independent quadrature oracles.

Every nontrivial constant is recomputed here from its defining integral with
scipy's adaptive routines (singularities split off, oscillatory tails via the
cosine-weighted QAWF transform), never from the closed form under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fracspde.constants import (
    C_H,
    c_H,
    c_alpha,
    fbm_covariance,
    frequency_identity_constant,
    spectral_density,
    validate_hurst,
)


def cosine_deficit_integral(alpha, scale=1.0):
    """Oracle for int_0^inf (1 - cos(s x)) x^(-alpha-1) dx.

    Splits at x = 1/s: the head uses the cancellation-safe form 2 sin^2(sx/2),
    the tail uses int x^(-alpha-1) dx minus a QAWF cosine-weighted integral,
    which scipy extrapolates over the infinite oscillatory range.
    """
    split = 1.0 / scale

    def head(x):
        return 2.0 * math.sin(scale * x / 2.0) ** 2 * x ** (-alpha - 1.0)

    head_val, _ = quad(head, 0.0, split, limit=200)
    power_tail = split ** (-alpha) / alpha
    cos_tail, _ = quad(
        lambda x: x ** (-alpha - 1.0), split, np.inf, weight="cos", wvar=scale, limit=400
    )
    return head_val + power_tail - cos_tail


class TestCAlpha:
    def test_alpha_one_is_exactly_half_pi(self):
        assert c_alpha(1.0) == math.pi / 2.0

    def test_frozen_values(self):
        # sqrt(2 pi) at alpha = 1/2: Gamma(1/2) cos(pi/4) / (1/2)
        assert c_alpha(0.5) == pytest.approx(2.5066282746310007, rel=1e-12)
        assert c_alpha(0.5) == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-12)
        assert c_alpha(1.5) == pytest.approx(1.6710855164206668, rel=1e-12)

    @pytest.mark.parametrize(
        "alpha",
        [0.05, 0.2, 0.4, 0.5, 0.6, 0.8, 0.95, 1.0, 1.05, 1.2, 1.5, 1.8, 1.95],
    )
    def test_matches_quadrature_oracle(self, alpha):
        assert c_alpha(alpha) == pytest.approx(cosine_deficit_integral(alpha), rel=1e-4)

    @pytest.mark.parametrize("scale", [0.5, 2.0, 7.0])
    def test_scaling_rule(self, scale):
        # int (1 - cos(s x)) x^(-alpha-1) dx = c_alpha s^alpha
        alpha = 0.7
        oracle = cosine_deficit_integral(alpha, scale=scale)
        assert c_alpha(alpha) * scale**alpha == pytest.approx(oracle, rel=1e-4)

    def test_continuous_across_branch_point(self):
        for eps in (1e-6, 1e-8):
            assert c_alpha(1.0 - eps) == pytest.approx(math.pi / 2.0, rel=1e-5)
            assert c_alpha(1.0 + eps) == pytest.approx(math.pi / 2.0, rel=1e-5)

    @pytest.mark.parametrize("alpha", [-0.1, 0.0, 2.0, 2.5, math.nan])
    def test_domain_error(self, alpha):
        with pytest.raises(ValueError):
            c_alpha(alpha)

    @given(st.floats(min_value=0.05, max_value=1.95))
    def test_positive(self, alpha):
        assert c_alpha(alpha) > 0.0


class TestCH:
    def test_frozen_values(self):
        assert c_H(0.25) == pytest.approx(0.09973557010035816, rel=1e-12)
        assert c_H(0.3) == pytest.approx(0.11504819084081606, rel=1e-12)
        assert c_H(0.5) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-12)

    @pytest.mark.parametrize("h", [0.26, 0.3, 0.35, 0.4, 0.45])
    def test_normalizes_fbm_variance(self, h):
        """c_H is pinned by requiring int |F1_(0,1]|^2 c_H |xi|^(1-2h) dxi = 1.

        |F1_(0,1](xi)|^2 = 2(1 - cos xi)/xi^2, so the requirement reads
        4 c_H int_0^inf (1 - cos xi) xi^(-1-2h) dxi = 1.
        """
        oracle = cosine_deficit_integral(2.0 * h)
        assert 4.0 * c_H(h) * oracle == pytest.approx(1.0, rel=1e-4)

    def test_domain(self):
        with pytest.raises(ValueError):
            c_H(0.0)
        with pytest.raises(ValueError):
            c_H(1.0)

    @given(st.floats(min_value=0.01, max_value=0.49))
    def test_positive(self, h):
        assert c_H(h) > 0.0
        assert C_H(h) > 0.0


class TestCHBig:
    def test_closed_form(self):
        assert C_H(0.3) == pytest.approx(0.06, rel=1e-12)
        assert C_H(0.25) == pytest.approx(0.0625, rel=1e-12)

    def test_vanishes_at_half(self):
        assert C_H(0.5 - 1e-12) == pytest.approx(0.0, abs=1e-11)

    def test_domain(self):
        with pytest.raises(ValueError):
            C_H(0.5)
        with pytest.raises(ValueError):
            C_H(-0.1)


class TestFrequencyIdentityConstant:
    @pytest.mark.parametrize("h", [0.26, 0.3, 0.35, 0.4, 0.45])
    def test_matches_quadrature_oracle(self, h):
        """Oracle: int_R |1 - e^(-i x)|^2 |x|^(2h-2) dx with the singularity
        at 0 handled by the 2 sin^2 form and the tail by QAWF."""
        oracle = 4.0 * cosine_deficit_integral(1.0 - 2.0 * h)
        assert frequency_identity_constant(h) == pytest.approx(oracle, rel=1e-4)

    def test_frozen_values(self):
        assert frequency_identity_constant(0.25) == pytest.approx(10.0265, rel=1e-4)
        assert frequency_identity_constant(0.4) == pytest.approx(22.1450, rel=1e-4)

    def test_scaling_in_frequency(self):
        # the xi-dependent integral scales as |xi|^(1-2h); probe at |xi| = 2
        h = 0.25
        scaled = 4.0 * cosine_deficit_integral(1.0 - 2.0 * h, scale=2.0) / 2.0
        expected = frequency_identity_constant(h) * 2.0 ** (1.0 - 2.0 * h) / 2.0
        assert scaled == pytest.approx(expected, rel=1e-4)

    def test_consistency_with_other_constants(self):
        for h in (0.26, 0.35, 0.44):
            assert frequency_identity_constant(h) == pytest.approx(
                2.0 * math.pi * c_H(h) / C_H(h), rel=1e-12
            )

    def test_domain(self):
        with pytest.raises(ValueError):
            frequency_identity_constant(0.5)


class TestFbmCovariance:
    def test_unit_variance_from_quadrature(self):
        """Var B(1) = int |F1_(0,1]|^2 dmu must equal 1 for any h: this is
        exactly what the c_H normalization enforces."""
        for h in (0.26, 0.3, 0.42):
            oracle = 4.0 * c_H(h) * cosine_deficit_integral(2.0 * h)
            assert fbm_covariance(1.0, 1.0, h) == pytest.approx(1.0, rel=1e-12)
            assert oracle == pytest.approx(1.0, rel=1e-4)

    def test_opposite_points(self):
        assert fbm_covariance(1.0, -1.0, 0.3) == pytest.approx(
            (2.0 - 2.0**0.6) / 2.0, rel=1e-12
        )

    def test_zero_point(self):
        assert fbm_covariance(0.0, 3.7, 0.33) == 0.0

    def test_cross_covariance_from_quadrature(self):
        """E[B(x)B(y)] = c_H int F1_(0,x] conj(F1_(0,y]) |xi|^(1-2h) dxi.

        Real part of the product: [cos((x-y)xi) - cos(x xi) - cos(y xi) + 1]/xi^2,
        which the cosine-deficit oracle assembles by linearity.
        """
        h, x, y = 0.35, 1.0, 2.5
        oracle = (
            2.0
            * c_H(h)
            * (
                cosine_deficit_integral(2.0 * h, scale=x)
                + cosine_deficit_integral(2.0 * h, scale=y)
                - cosine_deficit_integral(2.0 * h, scale=abs(x - y))
            )
        )
        assert fbm_covariance(x, y, h) == pytest.approx(oracle, rel=1e-4)

    @given(
        st.floats(min_value=-5.0, max_value=5.0),
        st.floats(min_value=-5.0, max_value=5.0),
        st.floats(min_value=0.26, max_value=0.49),
    )
    def test_symmetry_and_diagonal(self, x, y, h):
        assert fbm_covariance(x, y, h) == fbm_covariance(y, x, h)
        assert fbm_covariance(x, x, h) == pytest.approx(abs(x) ** (2.0 * h), rel=1e-12)

    @settings(max_examples=25)
    @given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10**6))
    def test_positive_semidefinite(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-3.0, 3.0, size=n)
        h = rng.uniform(0.26, 0.49)
        gram = fbm_covariance(pts[:, None], pts[None, :], h)
        eigs = np.linalg.eigvalsh(gram)
        assert eigs.min() >= -1e-10


class TestSpectralDensity:
    def test_values_and_symmetry(self):
        h = 0.3
        xi = np.array([-2.0, -0.5, 0.5, 2.0])
        out = spectral_density(xi, h)
        assert np.allclose(out, c_H(h) * np.abs(xi) ** (1.0 - 2.0 * h))
        assert np.allclose(out, out[::-1])
        assert np.all(out >= 0.0)


class TestValidateHurst:
    def test_passes_inside(self):
        assert validate_hurst(0.3) == 0.3

    @pytest.mark.parametrize("h", [0.25, 0.5, 0.1, 0.7, math.nan])
    def test_rejects_outside_solver_range(self, h):
        with pytest.raises(ValueError):
            validate_hurst(h)

    def test_custom_range(self):
        assert validate_hurst(0.1, lo=0.0, hi=0.5) == 0.1
        with pytest.raises(ValueError):
            validate_hurst(0.6, lo=0.0, hi=0.5)
