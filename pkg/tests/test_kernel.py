"""Kernel layer: normalizer closed forms, unit norm, eigenvalues, convolution."""

import math

import numpy as np
import pytest

from vmfhead.errors import DomainError
from vmfhead.kernel import (
    VmfKernel,
    convolve_vmf,
    kernel_eigenvalue,
    kernel_eval,
    kernel_log_eval,
    kernel_norm,
    vmf_log_normalizer,
)
from vmfhead.sphere import uniform_sphere_sample


class TestLogNormalizer:
    def test_m2_closed_form(self):
        # In three ambient dimensions the normalizer is lam / sinh(lam).
        np.testing.assert_allclose(vmf_log_normalizer(2, 1.0), math.log(1.0 / math.sinh(1.0)), atol=1e-12)
        np.testing.assert_allclose(math.exp(vmf_log_normalizer(2, 20.0)), 20.0 / math.sinh(20.0), rtol=1e-12)
        assert abs(vmf_log_normalizer(2, 1e-7)) <= 1e-9

    def test_consistency_invariant(self):
        kern = VmfKernel.create(5, 37.0)
        assert abs(kern.log_normalizer - vmf_log_normalizer(5, 37.0)) <= 1e-10
        with pytest.raises(DomainError):
            VmfKernel(m=5, lam=37.0, log_normalizer=kern.log_normalizer + 1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            vmf_log_normalizer(0, 1.0)
        with pytest.raises(DomainError):
            vmf_log_normalizer(2, 0.0)


class TestKernelNorm:
    @pytest.mark.parametrize("m", [2, 8, 16])
    @pytest.mark.parametrize("lam", [1.0, 10.0, 100.0])
    def test_unit_norm(self, m, lam):
        np.testing.assert_allclose(kernel_norm(m, lam), 1.0, atol=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            kernel_norm(1, 1.0)


class TestEigenvalues:
    def test_k0_exact(self):
        for m in (2, 9):
            for lam in (0.5, 80.0):
                assert kernel_eigenvalue(m, 0, lam) == 1.0

    def test_m2_closed_form(self):
        for lam in (0.5, 1.0, 5.0, 20.0):
            ref = 1.0 / math.tanh(lam) - 1.0 / lam
            np.testing.assert_allclose(kernel_eigenvalue(2, 1, lam), ref, atol=1e-12)

    def test_sandwich_and_monotonicity(self):
        for m in (8, 12):
            for lam in (1.0, 10.0, 100.0):
                prev = 1.0 + 1e-15
                for k in range(11):
                    a = kernel_eigenvalue(m, k, lam)
                    v = (m - 1) / 2.0 + k
                    lower = (lam / (v + math.hypot(lam, v))) ** k
                    assert lower * (1 - 1e-12) <= a <= 1.0 + 1e-15
                    assert a <= prev
                    prev = a

    def test_specific_sandwich_example(self):
        a = kernel_eigenvalue(8, 3, 10.0)
        v = 3.5 + 3
        lower = (10.0 / (v + math.hypot(10.0, v))) ** 3
        assert lower <= a <= 1.0


class TestKernelEval:
    def test_examples(self):
        kern = VmfKernel.create(2, 1.0)
        np.testing.assert_allclose(kernel_eval(kern, 0.0), 1.0 / math.sinh(1.0), rtol=1e-12)
        np.testing.assert_allclose(kernel_eval(kern, 1.0), math.e / math.sinh(1.0), rtol=1e-12)

    def test_monotone_and_log_variant(self):
        kern = VmfKernel.create(3, 7.0)
        ts = np.linspace(-1, 1, 101)
        vals = kernel_eval(kern, ts)
        assert np.all(np.diff(vals) > 0)
        np.testing.assert_allclose(np.log(vals), kernel_log_eval(kern, ts), atol=1e-12)

    def test_log_domain_at_extreme_concentration(self):
        # The normalizer cancels e^lam at t = 1: K(1) ~ 2 lam for m = 2, so
        # even huge concentrations stay finite through the log path.
        kern = VmfKernel.create(2, 3000.0)
        assert math.isfinite(kernel_log_eval(kern, 1.0))
        np.testing.assert_allclose(kernel_eval(kern, 1.0), 6000.0, rtol=1e-9)

    def test_domain(self):
        kern = VmfKernel.create(2, 1.0)
        with pytest.raises(DomainError):
            kernel_eval(kern, 1.5)


class TestEigenvalueQuadrature:
    def test_gegenbauer_quadrature_matches_closed_form(self):
        """The eigenvalue integral (w_{m-1}/w_m) int K(t) Q_k(t)/Q_k(1)
        (1-t^2)^((m-2)/2) dt, evaluated with the polynomial recurrence and
        Gauss-Legendre nodes, lands on the Bessel-ratio product."""
        from vmfhead.specialfn import gegenbauer
        from vmfhead.sphere import surface_area

        m = 2
        nodes, weights = np.polynomial.legendre.leggauss(600)
        ratio = surface_area(m - 1) / surface_area(m)
        for lam in (1.0, 5.0, 20.0):
            kern = VmfKernel.create(m, lam)
            kvals = np.exp(kernel_log_eval(kern, nodes))
            for k in range(5):
                qk = np.array([gegenbauer(k, (m - 1) / 2.0, float(t)) for t in nodes])
                qk1 = gegenbauer(k, (m - 1) / 2.0, 1.0)
                quad = ratio * float(np.sum(weights * kvals * qk / qk1))
                assert abs(quad - kernel_eigenvalue(m, k, lam)) <= 1e-6, (k, lam)


class TestConvolution:
    def test_constant_preserved(self):
        kern = VmfKernel.create(2, 5.0)
        x = uniform_sphere_sample(2, 1, seed=1)[0]
        est, sem = convolve_vmf(lambda ys: np.full((len(ys), 1), 0.7), kern, x, 50_000, seed=2)
        assert abs(est[0] - 0.7) <= 3 * sem[0]

    def test_degree_one_eigenfunction(self):
        lam = 10.0
        kern = VmfKernel.create(2, lam)
        a1 = kernel_eigenvalue(2, 1, lam)
        x = np.array([1.0, 0.0, 0.0])
        est, sem = convolve_vmf(lambda ys: ys[:, :1], kern, x, 400_000, seed=3)
        assert abs(est[0] - a1 * 1.0) <= 3 * sem[0]
        assert abs(est[0] - 0.9000000041223073) <= 4 * sem[0]

    def test_degree_two_eigenfunction(self):
        lam = 6.0
        kern = VmfKernel.create(2, lam)
        a2 = kernel_eigenvalue(2, 2, lam)
        x = np.array([0.6, 0.8, 0.0])

        def harm(ys):
            return (ys[:, 0] * ys[:, 1])[:, None]

        est, sem = convolve_vmf(harm, kern, x, 400_000, seed=4)
        assert abs(est[0] - a2 * 0.48) <= 3 * sem[0]

    def test_approximate_identity_regime(self):
        lam = 200.0
        kern = VmfKernel.create(2, lam)
        x = uniform_sphere_sample(2, 1, seed=5)[0]

        def bump(ys):
            return np.exp(3.0 * (ys @ x - 1.0))[:, None]

        est, sem = convolve_vmf(bump, kern, x, 400_000, seed=6)
        assert abs(est[0] - 1.0) <= 0.05

    def test_requires_samples(self):
        kern = VmfKernel.create(2, 1.0)
        with pytest.raises(DomainError):
            convolve_vmf(lambda ys: ys, kern, np.array([1.0, 0, 0]), 10, seed=0)
