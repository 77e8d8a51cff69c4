"""Catalog kernels and the eigenfunction transform."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bridgelab as bl
from bridgelab.kernels import DomainError, bessel3_density


GAUSS_1_0_0 = 1.0 / math.sqrt(2.0 * math.pi)


class TestCatalogValues:
    def test_gaussian_at_mode(self):
        g = bl.gaussian_kernel()
        assert g.density(1.0, 0.0, 0.0) == pytest.approx(GAUSS_1_0_0, rel=1e-15)

    @pytest.mark.parametrize("t,x,y", [(1.0, 0.0, 0.5), (0.3, -1.0, 2.0), (2.5, 1.0, 1.0)])
    def test_tanh_transition_measure_matches_tilted_gaussian(self, t, x, y):
        # Lebesgue form of the transformed kernel equals
        # exp(-t/2) cosh(y)/cosh(x) times the Gaussian density
        g = bl.gaussian_kernel()
        tk = bl.tanh_drift_kernel(1.0, 0.0)
        expected = math.exp(-t / 2) * math.cosh(y) / math.cosh(x) * g.density(t, x, y)
        assert tk.lebesgue_density(t, x, y) == pytest.approx(expected, rel=1e-13)

    def test_constant_drift_is_shifted_gaussian(self):
        k = 0.7
        dk = bl.constant_drift_kernel(k)
        t, x = 1.3, -0.4
        ys = np.linspace(-3, 4, 15)
        expected = np.exp(-(ys - x - k * t) ** 2 / (2 * t)) / np.sqrt(2 * np.pi * t)
        assert np.allclose(dk.lebesgue_density(t, x, ys), expected, rtol=1e-12)

    def test_bessel3_entrance_law(self):
        b3 = bl.bessel3_kernel()
        t, y = 1.0, 1.5
        expected = math.sqrt(2.0 / (math.pi * t ** 3)) * math.exp(-y * y / (2 * t))
        assert b3.density(t, 0.0, y) == pytest.approx(expected, rel=1e-14)

    def test_bessel3_interior_symmetric(self):
        b3 = bl.bessel3_kernel()
        assert b3.density(0.7, 0.9, 2.1) == pytest.approx(
            float(b3.density(0.7, 2.1, 0.9)), rel=1e-14)

    def test_bessel3_density_forms_agree_across_blend(self):
        # sinh form (small x*y/t) and reflection-difference form (large)
        # must agree where both are stable
        t = 1.0
        for u_target in (0.05, 0.09, 0.11, 0.5, 5.0):
            x = 0.3
            y = u_target * t / x
            direct = (math.exp(-(y - x) ** 2 / (2 * t))
                      - math.exp(-(y + x) ** 2 / (2 * t))) \
                / (x * y * math.sqrt(2 * math.pi * t))
            assert float(bessel3_density(t, x, y)) == pytest.approx(direct, rel=1e-9)

    def test_bessel3_no_overflow_far_out(self):
        val = float(bessel3_density(1.0, 40.0, 40.0))
        assert np.isfinite(val) and val > 0


class TestFlippedBessel:
    def setup_method(self):
        self.kx = bl.flipped_bessel_kernel("X")
        self.ky = bl.flipped_bessel_kernel("Y")

    def test_origin_value_matches_closed_form(self):
        t, y = 1.0, 1.0
        big = (1 + math.exp(-2 * t)) / math.sqrt(2 * math.pi * t ** 3) \
            * math.exp(-y * y / (2 * t))
        assert self.kx.density(t, 0.0, y) == pytest.approx(big, rel=1e-12)
        assert float(self.kx.density(t, 0.0, y)) == pytest.approx(0.274718, abs=1e-6)

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("y", [0.5, 1.0, 2.0])
    def test_variants_swap_origin_formulas(self, t, y):
        gauss_part = math.exp(-y * y / (2 * t)) / math.sqrt(2 * math.pi * t ** 3)
        big = (1 + math.exp(-2 * t)) * gauss_part
        small = (1 - math.exp(-2 * t)) * gauss_part
        # X starts the origin on the positive side, Y on the negative side
        assert self.kx.density(t, 0.0, y) == pytest.approx(big, rel=1e-12)
        assert self.kx.density(t, 0.0, -y) == pytest.approx(small, rel=1e-12)
        assert self.ky.density(t, 0.0, -y) == pytest.approx(big, rel=1e-12)
        assert self.ky.density(t, 0.0, y) == pytest.approx(small, rel=1e-12)

    def test_one_sided_ratio(self):
        t, y = 0.8, 1.3
        ratio = float(self.kx.density(t, 0.0, y) / self.kx.density(t, 0.0, -y))
        expected = (1 + math.exp(-2 * t)) / (1 - math.exp(-2 * t))
        assert ratio == pytest.approx(expected, rel=1e-10)

    def test_variants_identical_away_from_origin(self):
        t = 0.9
        xs = np.array([-2.0, -0.3, 0.4, 1.7])
        ys = np.array([-1.1, 0.6, 2.2, -0.2])
        for x in xs:
            assert np.allclose(self.kx.density(t, x, ys), self.ky.density(t, x, ys),
                               rtol=0, atol=0)

    def test_symmetric_in_arguments(self):
        t = 1.2
        assert self.kx.density(t, 0.7, -1.4) == pytest.approx(
            float(self.kx.density(t, -1.4, 0.7)), rel=1e-14)


class TestHTransform:
    def test_identity_transform_is_exact(self):
        g = bl.gaussian_kernel()
        eye = bl.Eigenpair(psi=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                           lam=0.0)
        ident = bl.h_transform(g, eye)
        t, x, y = 0.7, -0.3, 1.1
        assert float(ident.density(t, x, y)) == float(g.density(t, x, y))
        assert float(ident.measure.density(y)) == float(g.measure.density(y))

    @given(k=st.floats(min_value=-2.0, max_value=2.0),
           lam=st.floats(min_value=-1.0, max_value=1.0))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_cancels(self, k, lam):
        g = bl.gaussian_kernel()
        psi = lambda x: np.exp(k * np.asarray(x, dtype=float))
        inv = lambda x: np.exp(-k * np.asarray(x, dtype=float))
        once = bl.h_transform(g, bl.Eigenpair(psi=psi, lam=lam))
        back = bl.h_transform(once, bl.Eigenpair(psi=inv, lam=-lam))
        for (t, x, y) in [(0.5, 0.0, 1.0), (2.0, -1.5, 0.3)]:
            assert float(back.density(t, x, y)) == pytest.approx(
                float(g.density(t, x, y)), rel=1e-12)
            assert float(back.measure.density(y)) == pytest.approx(1.0, rel=1e-12)

    def test_transformed_measure_density(self):
        tk = bl.tanh_drift_kernel(1.0, 0.5)
        ys = np.linspace(-2, 2, 9)
        expected = (np.cosh(ys + 0.5) / math.cosh(0.5)) ** 2
        assert np.allclose(tk.measure.density(ys), expected, rtol=1e-14)

    def test_transition_measure_form(self):
        # Q_t(x, dy) = exp(-lam t) [psi(y)/psi(x)] P_t(x, dy)
        g = bl.gaussian_kernel()
        k, c = 2.0, 1.0
        tk = bl.tanh_drift_kernel(k, c)
        t, x = 0.6, 0.4
        ys = np.linspace(-2, 3, 11)
        psi = lambda v: np.cosh(k * v + c) / math.cosh(c)
        expected = np.exp(-0.5 * k * k * t) * psi(ys) / psi(x) * g.density(t, x, ys)
        assert np.allclose(tk.lebesgue_density(t, x, ys), expected, rtol=1e-12)

    def test_bridge_base_walks_to_root(self):
        tk = bl.tanh_drift_kernel(1.0, 0.0)
        assert tk.bridge_base.name == "gaussian"
        assert tk.bridge_family == "gaussian"


class TestDomainAndIds:
    def test_time_domain_error(self):
        g = bl.gaussian_kernel()
        with pytest.raises(DomainError):
            g.density(0.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            g.density(-1.0, 0.0, 0.0)

    def test_support_domain_error(self):
        b3 = bl.bessel3_kernel()
        with pytest.raises(DomainError):
            b3.density(1.0, -0.5, 1.0)
        # entrance boundary is evaluable
        assert float(b3.density(1.0, 0.0, 1.0)) > 0

    @pytest.mark.parametrize("kid,name", [
        ("gaussian", "gaussian"),
        ("drift:1.5", "drift:1.5"),
        ("tanh:1:0", "tanh:1:0"),
        ("tanh:0.5:1", "tanh:0.5:1"),
        ("bessel3", "bessel3"),
        ("flipbessel:X", "flipbessel:X"),
        ("flipbessel:Y", "flipbessel:Y"),
    ])
    def test_kernel_ids_resolve(self, kid, name):
        assert bl.kernel_from_id(kid).name == name

    @pytest.mark.parametrize("bad", ["nope", "drift", "tanh:1", "flipbessel:Z",
                                     "drift:abc"])
    def test_bad_ids_rejected(self, bad):
        with pytest.raises(ValueError):
            bl.kernel_from_id(bad)

    def test_positivity_on_open_support(self):
        for kid in ("gaussian", "drift:1", "tanh:1:0", "bessel3", "flipbessel:X"):
            k = bl.kernel_from_id(kid)
            lo, _ = k.measure.support
            xs = np.array([0.3, 1.0, 2.5]) if lo == 0 else np.array([-2.0, 0.1, 1.7])
            for t in (0.25, 1.0, 4.0):
                d = np.asarray(k.density(t, xs[0], xs))
                assert np.all(np.isfinite(d)) and np.all(d > 0)


class TestLikelihoodWeight:
    def test_multiplicative_over_time(self):
        eig = bl.Eigenpair(psi=np.cosh, lam=0.5)
        rng = np.random.default_rng(0)
        x0, xt, xts = rng.standard_normal(3)
        t, s = 0.7, 0.4
        whole = bl.radon_nikodym_weight(eig, t + s, x0, xts)
        split = bl.radon_nikodym_weight(eig, t, x0, xt) \
            * bl.radon_nikodym_weight(eig, s, xt, xts)
        assert float(whole) == pytest.approx(float(split), rel=1e-14)

    def test_martingale_mean_one(self):
        rng = np.random.default_rng(42)
        eig = bl.Eigenpair(psi=np.cosh, lam=0.5)
        for t in (0.5, 1.0, 2.0):
            xt = math.sqrt(t) * rng.standard_normal(100_000)
            mean, se = bl.mc_mean_with_se(bl.radon_nikodym_weight(eig, t, 0.0, xt))
            assert abs(mean - 1.0) < 3 * se
