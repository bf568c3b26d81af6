"""원형/선형 밀도와 코퓰라 smoke test"""

import math
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy import stats

from models.errors import UsageError
from services.circular_densities import (
    CircularDensity,
    LinearDensity,
    circular_mean,
    sample_vmf,
    wrapped_normal_terms,
)
from services.copula import (
    QS_ALPHA,
    link_angle,
    link_copula_density,
    qs_copula_density,
    sample_link_copula,
    sample_qs_copula,
)
from services.quadrature import circle_factor
from services.special_math import bessel_ratio, gauss_legendre

# ── 테스트 데이터 ──
CIRCULAR = [
    CircularDensity("vonMises", {"mu": 1.0, "kappa": 3.0}),
    CircularDensity("cardioid", {"mu": 2.0, "rho": 0.4}),
    CircularDensity("wrappedCauchy", {"mu": 5.0, "rho": 0.6}),
    CircularDensity("wrappedNormal", {"mu": 0.5, "sigma": 1.5}),
    CircularDensity("vmMixture", {"p1": 0.3, "mu1": 0.0, "kappa1": 4.0, "mu2": 3.0, "kappa2": 1.0}),
    CircularDensity("uniform", {}),
]
LINEAR = [
    LinearDensity("normal", {"m": 1.0, "sigma": 2.0}),
    LinearDensity("lognormal", {"m": 0.5, "sigma": 0.5}),
    LinearDensity("gamma", {"a": 2.0, "p": 3.0}),
    LinearDensity("normalMixture", {"p1": 0.4, "m1": -1.0, "sigma1": 0.5, "m2": 2.0, "sigma2": 1.0}),
]
N = 20000


def test_circular_pdfs_integrate_to_one():
    factor = circle_factor(1024)
    for d in CIRCULAR:
        mass = factor.integrate(d.pdf(factor.angles))
        assert abs(mass - 1.0) < 1e-8, f"{d.family}: {mass}"
        assert np.all(d.pdf(factor.angles) >= 0)
    print("  [PASS] circular densities integrate to 1")


def test_circular_cdf_and_ppf():
    for d in CIRCULAR:
        assert abs(float(d.cdf(0.0))) < 1e-12
        assert abs(float(d.cdf(2 * np.pi)) - 1.0) < 1e-12
        u = np.array([0.1, 0.5, 0.9])
        assert np.allclose(d.cdf(d.ppf(u)), u, atol=1e-6), d.family
        # 직접 적분과 비교
        nodes, weights = gauss_legendre(200, 0.0, 2.5)
        assert abs(float(d.cdf(2.5)) - np.dot(weights, d.pdf(nodes))) < 1e-5, d.family
    assert abs(float(CIRCULAR[-1].cdf(np.pi)) - 0.5) < 1e-15
    print("  [PASS] circular cdf / ppf")


def test_circular_samplers():
    """평균 합성벡터 길이: vM A(κ), 카디오이드 ρ, WC ρ, WN e^{-σ²/2}"""
    rng = np.random.default_rng(7)
    expected = {
        "vonMises": float(bessel_ratio(0, 3.0)),
        "cardioid": 0.4,
        "wrappedCauchy": 0.6,
        "wrappedNormal": math.exp(-1.5 ** 2 / 2),
    }
    for d in CIRCULAR:
        theta = d.sample(N, rng)
        assert theta.shape == (N,)
        assert np.all((theta >= 0) & (theta < 2 * np.pi))
        if d.family in expected:
            mean_dir, rbar = circular_mean(theta)
            assert abs(rbar - expected[d.family]) < 0.02, f"{d.family}: {rbar}"
            delta = (mean_dir - d.params["mu"] + np.pi) % (2 * np.pi) - np.pi
            assert abs(delta) < 0.1, f"{d.family}: mean direction {mean_dir}"
        # 표 기반 cdf와의 KS 검정
        ks = stats.kstest(theta, d.cdf)
        assert ks.pvalue > 1e-3, f"{d.family}: KS p={ks.pvalue}"
    print("  [PASS] circular samplers")


def test_vmf_sampler_on_sphere():
    rng = np.random.default_rng(11)
    mu = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    kappa = 5.0
    x = sample_vmf(mu, kappa, N, rng)
    assert x.shape == (N, 3)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    # E[μᵀX] = coth κ − 1/κ
    expected = 1.0 / math.tanh(kappa) - 1.0 / kappa
    assert abs(float(np.mean(x @ mu)) - expected) < 0.01
    print("  [PASS] vMF sampler on S²")


def test_circular_parameter_checks():
    with pytest.raises(UsageError):
        CircularDensity("cardioid", {"mu": 0.0, "rho": 0.7})
    with pytest.raises(UsageError):
        CircularDensity("wrappedCauchy", {"mu": 0.0, "rho": 1.0})
    with pytest.raises(UsageError):
        CircularDensity("vonMises", {"mu": 0.0})
    with pytest.raises(UsageError):
        CircularDensity("triangular", {})
    assert wrapped_normal_terms(1.0) == 2
    assert wrapped_normal_terms(2 * math.pi) == 7
    print("  [PASS] circular parameter validation")


def test_linear_densities():
    rng = np.random.default_rng(3)
    for d in LINEAR:
        lo, hi = d.ppf(1e-12), d.ppf(1 - 1e-12)
        nodes, weights = gauss_legendre(400, float(lo), float(hi))
        assert abs(np.dot(weights, d.pdf(nodes)) - 1.0) < 1e-6, d.family
        assert abs(float(d.cdf(d.ppf(0.3))) - 0.3) < 1e-8, d.family
        mean, sd = d.moments()
        z = d.sample(N, rng)
        assert abs(np.mean(z) - mean) < 5 * sd / math.sqrt(N), d.family
        assert np.allclose(d.logpdf(nodes[::37]), np.log(d.pdf(nodes[::37])), rtol=1e-10), d.family
    assert LINEAR[1].positive_support and not LINEAR[0].positive_support
    with pytest.raises(UsageError):
        LinearDensity("normal", {"m": 0.0, "sigma": -1.0})
    print("  [PASS] linear densities")


def test_link_copula():
    g = CircularDensity("wrappedCauchy", {"mu": 0.5, "rho": 0.5})
    assert np.isclose(float(link_angle(0.25, 0.5, 1)), 1.5 * np.pi)
    assert np.isclose(float(link_angle(0.25, 0.5, -1)), 1.5 * np.pi)
    with pytest.raises(UsageError):
        link_angle(0.1, 0.2, 0)

    # 균등 주변분포: ∫ c(u, v) dv = 1
    v, wv = gauss_legendre(400, 0.0, 1.0)
    for sign in (1, -1):
        for u in (0.1, 0.6):
            assert abs(np.dot(wv, link_copula_density(g, u, v, sign)) - 1.0) < 1e-6

    rng = np.random.default_rng(5)
    for sign in (1, -1):
        u, v = sample_link_copula(g, sign, N, rng)
        assert stats.kstest(u, "uniform").pvalue > 1e-3
        assert stats.kstest(v, "uniform").pvalue > 1e-3
        # 링크 각도는 g를 따른다
        assert stats.kstest(link_angle(u, v, sign), g.cdf).pvalue > 1e-3
    print("  [PASS] link copula")


def test_qs_copula():
    u, wu = gauss_legendre(64, 0.0, 1.0)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    mass = wu @ qs_copula_density(uu, vv) @ wu
    assert abs(mass - 1.0) < 1e-12
    with pytest.raises(UsageError):
        qs_copula_density(0.2, 0.3, alpha=0.5)

    rng = np.random.default_rng(9)
    su, sv = sample_qs_copula(N, rng)
    assert stats.kstest(su, "uniform").pvalue > 1e-3
    assert stats.kstest(sv, "uniform").pvalue > 1e-3
    # E[cos(2πU)(1 − 2V)] = 2πα ∫cos² ∫(1 − 2v)² = 2πα · ½ · ⅓
    moment = float(np.mean(np.cos(2 * np.pi * su) * (1 - 2 * sv)))
    assert abs(moment - 2 * np.pi * QS_ALPHA / 6) < 0.02
    print("  [PASS] QS copula")
