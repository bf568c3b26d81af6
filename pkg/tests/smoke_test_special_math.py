"""특수함수/커널 상수 smoke test"""

import math
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy import special

from models.errors import NumericError, UsageError
from services.kernels import DEFAULT_KERNEL, make_kernel_pair
from services.special_math import (
    bessel_i,
    bessel_ratio,
    gauss_legendre,
    kernel_constants,
    log_normalizing_constant,
    log_vmf_constant,
    r_normal,
    r_von_mises,
    sigma_sq_kernel_factor,
    sphere_area,
)


def test_bessel_values():
    """I_0, I_1 기준값과 overflow 처리"""
    assert abs(bessel_i(0, 0.0).value - 1.0) < 1e-15
    assert abs(bessel_i(0, 1.0).value - 1.2660658777520082) < 1e-14
    assert abs(bessel_i(1, 1.0).value - 0.5651591039924851) < 1e-14
    assert bessel_i(1, 0.0).value == 0.0

    big = bessel_i(0, 1e6)
    assert math.isinf(big.value), "I_0(10⁶) overflows the unscaled value"
    assert math.isfinite(big.scaled_value) and big.scaled_value > 0
    # e^{-x} I_0(x) ~ 1/√(2πx)
    assert abs(big.scaled_value * math.sqrt(2 * math.pi * 1e6) - 1.0) < 1e-5
    assert abs(big.log_value - (1e6 - 0.5 * math.log(2 * math.pi * 1e6))) < 1e-5

    ratio = float(bessel_ratio(0, 2.0))
    assert abs(ratio - special.i1(2.0) / special.i0(2.0)) < 1e-14
    print("  [PASS] bessel_i / bessel_ratio")


def test_bessel_rejects_negative():
    with pytest.raises(UsageError):
        bessel_i(-1, 1.0)
    with pytest.raises(UsageError):
        bessel_i(0, -0.5)
    print("  [PASS] bessel_i domain errors")


def test_sphere_area():
    assert abs(sphere_area(0) - 2.0) < 1e-15
    assert abs(sphere_area(1) - 2 * math.pi) < 1e-14
    assert abs(sphere_area(2) - 4 * math.pi) < 1e-13
    assert abs(sphere_area(3) - 2 * math.pi ** 2) < 1e-13
    with pytest.raises(UsageError):
        sphere_area(-1)
    print("  [PASS] sphere_area")


def test_vmf_constant_and_roughness():
    # C_1(κ) = 1/(2π I_0(κ))
    for kappa in (0.5, 1.0, 10.0):
        expected = -math.log(2 * math.pi * special.i0(kappa))
        assert abs(log_vmf_constant(1, kappa) - expected) < 1e-12
    # C_2(κ) = κ/(4π sinh κ)
    kappa = 3.0
    assert abs(log_vmf_constant(2, kappa) - math.log(kappa / (4 * math.pi * math.sinh(kappa)))) < 1e-12
    assert abs(log_vmf_constant(2, 0.0) + math.log(4 * math.pi)) < 1e-15

    expected = special.i0(2.0) / (2 * math.pi * special.i0(1.0) ** 2)
    assert abs(r_von_mises(1.0) - expected) < 1e-12
    assert abs(r_normal(1.0) - 1 / (2 * math.sqrt(math.pi))) < 1e-15
    print("  [PASS] vMF constants and roughness")


def test_gauss_legendre_exact_for_polynomials():
    nodes, weights = gauss_legendre(8, -1.0, 3.0)
    assert abs(weights.sum() - 4.0) < 1e-13
    # ∫_{-1}^{3} z^5 dz = (3^6 - 1)/6
    assert abs(np.dot(weights, nodes ** 5) - (3 ** 6 - 1) / 6) < 1e-10
    assert not nodes.flags.writeable
    print("  [PASS] gauss_legendre")


def test_kernel_constants_von_mises_normal():
    """L(r) = e^{-r}, K = φ"""
    c1 = kernel_constants(DEFAULT_KERNEL, 1, 0.5)
    assert abs(c1.lambda_L - math.sqrt(2 * math.pi)) < 1e-8
    assert abs(c1.lambda_L2 - math.sqrt(math.pi)) < 1e-8
    assert abs(c1.b_q - 0.5) < 1e-8
    assert abs(c1.mu2_K - 1.0) < 1e-8
    assert abs(c1.R_K - 1 / (2 * math.sqrt(math.pi))) < 1e-8

    c2 = kernel_constants(DEFAULT_KERNEL, 2, 0.5)
    assert abs(c2.lambda_L - 2 * math.pi) < 1e-8
    assert abs(c2.lambda_L2 - math.pi) < 1e-8
    assert abs(c2.b_q - 1.0) < 1e-8
    print("  [PASS] closed-form kernel constants")


def test_normalizer_identity():
    """c_{h,q}(L)·λ_{h,q}(L)·h^q = 1"""
    for kernel in (DEFAULT_KERNEL, make_kernel_pair("epanechnikov", "normal")):
        for q in (1, 2):
            for h in (1.0, 0.5, 0.1):
                c = kernel_constants(kernel, q, h)
                product = c.c_hq * c.lambda_hq * h ** q
                assert abs(product - 1.0) < 1e-6, f"{kernel.name} q={q} h={h}: {product}"
    print("  [PASS] c·λ_hq·h^q = 1")


def test_lambda_hq_tends_to_lambda():
    c = kernel_constants(DEFAULT_KERNEL, 1, 0.01)
    assert abs(c.lambda_hq / c.lambda_L - 1.0) < 1e-4
    assert abs(log_normalizing_constant(DEFAULT_KERNEL, 1, 0.01) - c.log_c_hq) < 1e-9
    print("  [PASS] λ_hq → λ as h → 0")


def test_kernel_constants_reject_bad_input():
    with pytest.raises(UsageError):
        kernel_constants(DEFAULT_KERNEL, 0, 0.5)
    with pytest.raises(UsageError):
        kernel_constants(DEFAULT_KERNEL, 1, 0.0)
    with pytest.raises(NumericError):
        sigma_sq_kernel_factor(DEFAULT_KERNEL, 3)
    print("  [PASS] kernel constant errors")


def test_sigma_factors():
    """vM/정규 커널: (8π)^{-1/2}, (8π)^{-1}"""
    dir1, lin = sigma_sq_kernel_factor(DEFAULT_KERNEL, 1)
    dir2, _ = sigma_sq_kernel_factor(DEFAULT_KERNEL, 2)
    assert abs(dir1 - (8 * math.pi) ** -0.5) < 1e-6, dir1
    assert abs(dir2 - (8 * math.pi) ** -1) < 1e-6, dir2
    assert abs(lin - (8 * math.pi) ** -0.5) < 1e-8, lin
    print("  [PASS] σ² kernel factors")
