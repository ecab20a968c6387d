import math

import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from qcheck.errors import ConfigError
from qcheck.kernels import (K_FAMILIES, KernelSpec, bandwidth, k_eval,
                            psi_eval, triangle_var1)

SQRT6 = math.sqrt(6.0)


class TestKEval:
    def test_triangle_peak(self):
        # peak of a triangular density on [-a, a] is 1/a; unit variance forces a = sqrt(6)
        spec = KernelSpec(k_family="triangle_var1")
        assert k_eval(spec, 0.0) == pytest.approx(1.0 / SQRT6)
        assert k_eval(spec, 0.0) == pytest.approx(0.408248290463863, rel=1e-12)

    def test_triangle_support_endpoint(self):
        spec = KernelSpec(k_family="triangle_var1")
        assert k_eval(spec, SQRT6) == 0.0
        assert k_eval(spec, -SQRT6) == 0.0
        assert k_eval(spec, 10.0) == 0.0

    def test_gaussian_at_zero(self):
        spec = KernelSpec(k_family="gaussian")
        assert k_eval(spec, 0.0) == pytest.approx(0.3989422804014327)

    @pytest.mark.parametrize("family", K_FAMILIES)
    def test_integrates_to_one(self, family):
        spec = KernelSpec(k_family=family)
        total, _ = quad(lambda u: float(k_eval(spec, u)), -40, 40, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_triangle_unit_variance(self):
        total, _ = quad(lambda u: u * u * float(triangle_var1(u)), -SQRT6, SQRT6)
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("family", K_FAMILIES)
    @given(u=st.floats(-30, 30))
    def test_symmetric_and_bounded(self, family, u):
        spec = KernelSpec(k_family=family)
        assert float(k_eval(spec, u)) == float(k_eval(spec, -u))
        assert 0.0 <= float(k_eval(spec, u)) <= 0.5


class TestPsiEval:
    def test_scalar(self):
        spec = KernelSpec()
        assert psi_eval(spec, [0.0]) == pytest.approx(0.3989422804014327)

    def test_product_rule(self):
        # oracle: direct multiply of the two standard normal densities
        spec = KernelSpec()
        phi0 = 1.0 / math.sqrt(2.0 * math.pi)
        assert psi_eval(spec, [0.0, 0.0]) == pytest.approx(phi0 * phi0, rel=1e-14)
        assert psi_eval(spec, [0.0, 0.0]) == pytest.approx(0.15915494309189535, rel=1e-12)

    def test_empty_difference_is_one(self):
        assert psi_eval(KernelSpec(), []) == 1.0

    @given(st.lists(st.floats(-8, 8), min_size=1, max_size=5))
    def test_symmetry_and_positivity(self, dx):
        spec = KernelSpec()
        v = psi_eval(spec, dx)
        assert v == psi_eval(spec, [-t for t in dx])
        assert v > 0.0


class TestBandwidth:
    def test_c1_n100(self):
        assert bandwidth(KernelSpec(c=1.0), 100) == pytest.approx(
            0.3981071705534972, rel=1e-12)

    def test_c2_doubles(self):
        assert bandwidth(KernelSpec(c=2.0), 100) == pytest.approx(
            2 * 0.3981071705534972, rel=1e-12)

    def test_n_below_two_rejected(self):
        with pytest.raises(ConfigError):
            bandwidth(KernelSpec(), 1)


class TestKernelSpec:
    def test_bad_family(self):
        with pytest.raises(ConfigError):
            KernelSpec(k_family="box")

    def test_bad_c(self):
        with pytest.raises(ConfigError):
            KernelSpec(c=0.0)
