"""특수 함수와 커널 상수 계산.

수정 베셀 함수, 구면 넓이, von Mises(-Fisher) 정규화 상수(로그 공간),
커널 쌍에서 유도되는 λ_q(L), λ_q(L²), λ_{h,q}(L), c_{h,q}(L), b_q(L), μ₂(K), R(K),
그리고 ISE 중심극한정리의 분산 인자(σ² kernel factor)를 제공한다.
모든 함수는 순수 함수이며 결과는 불변 객체로 반환된다.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from models.errors import NumericError, UsageError

if TYPE_CHECKING:
    from services.kernels import KernelPair

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
PHI_TRUNCATION = 50.0   # φ_q 내부 이상적분 절단점 (ρ, r ≤ 50)
LINEAR_KERNEL_SPAN = 12.0
_DIVERGENCE_HINTS = ("divergent", "maximum number of subdivisions", "bad integrand behavior")


# ── 수정 베셀 함수 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class BesselEval:
    """I_ν(x)와 지수 스케일 값 e^{-x}·I_ν(x)"""
    order: float
    argument: float
    value: float          # overflow 시 inf
    scaled_value: float   # x = 10⁶ 까지 유한

    @property
    def log_value(self) -> float:
        if self.scaled_value <= 0.0:
            return -math.inf
        return math.log(self.scaled_value) + self.argument


def bessel_i(nu: float, x: float) -> BesselEval:
    """제1종 수정 베셀 함수 I_ν(x), ν ≥ 0, x ≥ 0"""
    if nu < 0:
        raise UsageError(f"Bessel order must be >= 0, got {nu}")
    if x < 0:
        raise UsageError(f"Bessel argument must be >= 0, got {x}")
    scaled = float(special.ive(nu, x))
    with np.errstate(over="ignore"):
        value = float(special.iv(nu, x))
    return BesselEval(order=float(nu), argument=float(x), value=value, scaled_value=scaled)


def log_bessel_i(nu: float, x):
    """log I_ν(x) (벡터화, 로그 공간)"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(special.ive(nu, x)) + x


def bessel_ratio(nu: float, x):
    """I_{ν+1}(x)/I_ν(x) (평균 합성벡터 길이 A(κ))"""
    x = np.asarray(x, dtype=float)
    return special.ive(nu + 1.0, x) / special.ive(nu, x)


# ── 구면 넓이와 vMF 정규화 상수 ──────────────────────────────────────────────────


def sphere_area(q: int) -> float:
    """ω_q = 2π^{(q+1)/2}/Γ((q+1)/2)"""
    if q < 0:
        raise UsageError(f"sphere dimension must be >= 0, got {q}")
    return 2.0 * math.pi ** ((q + 1) / 2.0) / math.gamma((q + 1) / 2.0)


def log_vmf_constant(q: int, kappa: float) -> float:
    """log C_q(κ), C_q(κ) = κ^{(q-1)/2} / ((2π)^{(q+1)/2} I_{(q-1)/2}(κ))"""
    if kappa < 0:
        raise UsageError(f"concentration must be >= 0, got {kappa}")
    if kappa < 1e-12:
        return -math.log(sphere_area(q))
    nu = (q - 1) / 2.0
    return (nu * math.log(kappa)
            - ((q + 1) / 2.0) * math.log(TWO_PI)
            - float(log_bessel_i(nu, kappa)))


def r_von_mises(kappa: float, q: int = 1) -> float:
    """R(f_vM) = ∫ f_vM² = C_q(κ)² / C_q(2κ)"""
    return math.exp(2.0 * log_vmf_constant(q, kappa) - log_vmf_constant(q, 2.0 * kappa))


def r_normal(sigma: float) -> float:
    """R(f_N) = 1/(2√π σ)"""
    return 1.0 / (2.0 * math.sqrt(math.pi) * sigma)


@lru_cache(maxsize=64)
def gauss_legendre(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """[a, b] 위의 n점 Gauss–Legendre 노드와 가중치"""
    t, w = leggauss(n)
    half = 0.5 * (b - a)
    nodes = half * t + 0.5 * (a + b)
    weights = half * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


# ── 커널 상수 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class KernelConstants:
    """커널 쌍 (L, K)와 (q, h)에서 유도되는 상수"""
    q: int
    h: float
    lambda_L: float      # λ_q(L)
    lambda_L2: float     # λ_q(L²)
    lambda_hq: float     # λ_{h,q}(L), 유한 h 정확식
    c_hq: float          # c_{h,q}(L)
    log_c_hq: float
    b_q: float           # b_q(L)
    mu2_K: float         # μ₂(K)
    R_K: float           # R(K)

    @property
    def variance_factor(self) -> float:
        """λ_q(L²)λ_q(L)^{-2}R(K)"""
        return self.lambda_L2 / self.lambda_L ** 2 * self.R_K


def _quad(func: Callable[[float], float], a: float, b: float, what: str, **kwargs) -> float:
    """scipy quad 래퍼. 발산 경고는 비허용 커널 오류로 승격, 반올림 경고는 로그만."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, err = integrate.quad(func, a, b, epsabs=1e-13, epsrel=1e-10, limit=400, **kwargs)
    for w in caught:
        message = str(w.message)
        if any(key in message for key in _DIVERGENCE_HINTS):
            raise NumericError(f"kernel not admissible: {what} diverges")
        logger.debug(f"{what}: {message.splitlines()[0]} (err≈{err:.2e})")
    if not math.isfinite(value):
        raise NumericError(f"kernel not admissible: {what} is not finite")
    return value


def _radial_moment(L: Callable[[float], float], a: float, what: str) -> float:
    """∫_0^∞ L(r) r^a dr (r=0 특이점은 대수 가중치로 처리)"""
    head = _quad(L, 0.0, 1.0, what, weight="alg", wvar=(a, 0.0))
    tail = _quad(lambda r: L(r) * r ** a, 1.0, np.inf, what)
    return head + tail


@lru_cache(maxsize=128)
def _radial_constants(kernel: 'KernelPair', q: int) -> Tuple[float, float, float]:
    L = kernel.directional
    a = q / 2.0 - 1.0
    scale = 2.0 ** a * sphere_area(q - 1)
    m0 = _radial_moment(L, a, "λ_q(L)")
    lam = scale * m0
    lam2 = scale * _radial_moment(lambda r: L(r) ** 2, a, "λ_q(L²)")
    b_q = _radial_moment(L, a + 1.0, "b_q(L)") / m0
    if lam <= 0 or lam2 <= 0 or b_q <= 0:
        raise NumericError(f"kernel not admissible: non-positive constants for {kernel.name}")
    return lam, lam2, b_q


@lru_cache(maxsize=32)
def linear_constants(kernel: 'KernelPair') -> Tuple[float, float]:
    """(μ₂(K), R(K))"""
    K = kernel.linear
    mu2 = _quad(lambda u: u * u * K(u), -np.inf, np.inf, "μ₂(K)")
    R_K = _quad(lambda u: K(u) ** 2, -np.inf, np.inf, "R(K)")
    return mu2, R_K


@lru_cache(maxsize=512)
def _lambda_hq(kernel: 'KernelPair', q: int, h: float) -> float:
    """λ_{h,q}(L) = ω_{q-1} ∫_0^{2h⁻²} L(r) r^{q/2-1} (2 - r h²)^{q/2-1} dr"""
    L = kernel.directional
    a = q / 2.0 - 1.0
    upper = 2.0 / h ** 2
    omega = sphere_area(q - 1)
    what = "λ_{h,q}(L)"
    if upper <= 60.0:
        value = _quad(L, 0.0, upper, what, weight="alg", wvar=(a, a)) * h ** (2 * a)
    else:
        head = _quad(lambda r: L(r) * (2.0 - r * h * h) ** a, 0.0, 50.0, what,
                     weight="alg", wvar=(a, 0.0))
        tail = _quad(lambda r: L(r) * r ** a, 50.0, upper, what,
                     weight="alg", wvar=(0.0, a)) * h ** (2 * a)
        value = head + tail
    return omega * value


def kernel_constants(kernel: 'KernelPair', q: int, h: float) -> KernelConstants:
    """커널 쌍의 모든 상수. von Mises 커널의 c_{h,q}는 로그 공간에서 계산."""
    if q < 1:
        raise UsageError(f"q must be >= 1, got {q}")
    if not h > 0:
        raise UsageError(f"h must be positive, got {h}")
    h = float(h)
    lam, lam2, b_q = _radial_constants(kernel, q)
    mu2, R_K = linear_constants(kernel)
    lam_hq = _lambda_hq(kernel, q, h)
    if kernel.is_von_mises:
        # c_{h,q}(L) = C_q(1/h²)·e^{1/h²}
        kappa = 1.0 / h ** 2
        log_c = log_vmf_constant(q, kappa) + kappa
    else:
        log_c = -math.log(lam_hq) - q * math.log(h)
    return KernelConstants(
        q=q, h=h, lambda_L=lam, lambda_L2=lam2, lambda_hq=lam_hq,
        c_hq=math.exp(log_c), log_c_hq=log_c, b_q=b_q, mu2_K=mu2, R_K=R_K,
    )


@lru_cache(maxsize=4096)
def log_normalizing_constant(kernel: 'KernelPair', q: int, h: float) -> float:
    """log c_{h,q}(L). vM 커널은 λ_{h,q} 적분 없이 닫힌 형태."""
    if kernel.is_von_mises:
        kappa = 1.0 / h ** 2
        return log_vmf_constant(q, kappa) + kappa
    return kernel_constants(kernel, q, h).log_c_hq


# ── ISE 분산 인자 ──────────────────────────────────────────────────


def _gamma_q(q: int) -> float:
    if q == 1:
        return 2.0 ** -0.5
    return sphere_area(q - 1) * sphere_area(q - 2) ** 2 * 2.0 ** (1.5 * q - 3.0)


def _directional_factor(kernel: 'KernelPair', q: int) -> float:
    L = kernel.directional
    lam = _radial_constants(kernel, q)[0]
    T = PHI_TRUNCATION
    if q == 1:
        # r = t², ρ = s²: 내부 적분 = 2∫ L(s²) L((t - s)²) ds
        s, ws = gauss_legendre(600, -math.sqrt(T), math.sqrt(T))
        Ls = L(s * s)

        def inner(t: float) -> float:
            return 2.0 * float(np.dot(ws, Ls * L((t - s) ** 2)))

        outer = _quad(lambda t: inner(t) ** 2, 0.0, math.sqrt(T), "σ² directional factor")
        outer *= 2.0   # ∫ r^{-1/2} F(r)² dr = 2∫ F(t²)² dt
    else:
        a = q / 2.0 - 1.0
        rho, wr = gauss_legendre(400, 0.0, T)
        ang, wa = gauss_legendre(160, 0.0, math.pi)
        theta = np.cos(ang)
        # (1-θ²)^{(q-3)/2} dθ = sin^{q-2}(φ) dφ
        wa = wa * np.sin(ang) ** (q - 2)
        base = rho ** a * L(rho) * wr

        def inner(r: float) -> float:
            arg = r + rho[:, None] - 2.0 * theta[None, :] * np.sqrt(r * rho[:, None])
            phi_q = L(np.maximum(arg, 0.0)) @ wa
            return float(np.dot(base, phi_q))

        outer = _quad(lambda r: r ** a * inner(r) ** 2, 0.0, T, "σ² directional factor")
    return _gamma_q(q) * lam ** -4 * outer


def _linear_factor(kernel: 'KernelPair') -> float:
    K = kernel.linear
    span = LINEAR_KERNEL_SPAN
    u, wu = gauss_legendre(600, -span, span)
    Ku = K(u) * wu

    def conv(v: float) -> float:
        return float(np.dot(Ku, K(u + v)))

    return _quad(lambda v: conv(v) ** 2, -2 * span, 2 * span, "σ² linear factor")


@lru_cache(maxsize=16)
def sigma_sq_kernel_factor(kernel: 'KernelPair', q: int) -> Tuple[float, float]:
    """(방향 인자, 선형 인자).

    방향 인자 = γ_q λ_q(L)^{-4} ∫ r^{q/2-1} [∫ ρ^{q/2-1} L(ρ) φ_q(r,ρ) dρ]² dr
    선형 인자 = ∫ [∫ K(u) K(u+v) du]² dv
    """
    if q not in (1, 2):
        raise NumericError(f"unsupported dimension q={q} for the σ² kernel factor (q ∈ {{1, 2}})")
    directional = _directional_factor(kernel, q)
    linear = _linear_factor(kernel)
    logger.debug(f"σ² factors for {kernel.name}, q={q}: {directional:.12g}, {linear:.12g}")
    return directional, linear
