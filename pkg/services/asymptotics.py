"""독립성 검정의 점근 상수와 φ(h,g) 진단.

vM + 정규 커널은 닫힌 형태, 그 외 커널은 sigma_sq_kernel_factor 의 구적 경로를 쓴다.
"""

import logging
import math
from typing import Optional, Union

import numpy as np

from models.errors import NumericError, UsageError
from models.results import AsymptoticConstants
from models.sample import Bandwidths
from services.circular_densities import CircularDensity, LinearDensity
from services.kde import KdeOnGrid, hessian_traces
from services.kernels import DEFAULT_KERNEL, KernelPair
from services.model_catalog import model_grid
from services.quadrature import QuadratureGrid, circle_factor, line_factor_interval
from services.special_math import (
    kernel_constants,
    r_normal,
    r_von_mises,
    sigma_sq_kernel_factor,
)

logger = logging.getLogger(__name__)

ROUGHNESS_CIRCLE_NODES = 4096
ROUGHNESS_LINE_NODES = 400
PHI_GRID = (128, 128)


# ── R(f) = ∫ f² ──────────────────────────────────────────────────


def roughness(density: Union[CircularDensity, LinearDensity]) -> float:
    """주변 밀도의 R(f). vM, 정규, 균등은 닫힌 형태."""
    if isinstance(density, CircularDensity):
        if density.family == "vonMises":
            return r_von_mises(density.params["kappa"])
        if density.family == "uniform":
            return 1.0 / (2.0 * math.pi)
        factor = circle_factor(ROUGHNESS_CIRCLE_NODES)
        return factor.integrate(density.pdf(factor.angles) ** 2)
    if density.family == "normal":
        return r_normal(density.params["sigma"])
    lo = 0.0 if density.positive_support else float(density.ppf(1e-10))
    factor = line_factor_interval(ROUGHNESS_LINE_NODES, lo, float(density.ppf(1.0 - 1e-10)))
    return factor.integrate(density.pdf(factor.points) ** 2)


def plugin_roughness(kde: KdeOnGrid, grid: QuadratureGrid):
    """(R(f̂_X), R(f̂_Z)) 격자 적분"""
    r_first = grid.first.integrate(kde.marginal_first ** 2)
    r_second = grid.second.integrate(kde.marginal_second ** 2)
    return r_first, r_second


# ── 독립성 검정 상수 ──────────────────────────────────────────────────


def _directional_volume(kernel: KernelPair, q: int) -> float:
    """λ_q(L²)λ_q(L)^{-2}. vM 커널이면 1/(2^q π^{q/2})."""
    if kernel.is_von_mises:
        return 1.0 / (2.0 ** q * math.pi ** (q / 2.0))
    c = kernel_constants(kernel, q, 1.0)
    return c.lambda_L2 / c.lambda_L ** 2


def _linear_roughness(kernel: KernelPair) -> float:
    if kernel.is_normal:
        return 1.0 / (2.0 * math.sqrt(math.pi))
    return kernel_constants(kernel, 1, 1.0).R_K


def _variance_factor(kernel: KernelPair, q: int, closed: bool) -> float:
    """(8π)^{-q/2} 또는 구적 방향 인자"""
    if closed:
        return (8.0 * math.pi) ** (-q / 2.0)
    return sigma_sq_kernel_factor(kernel, q)[0]


def asymptotic_constants(R_fX: float, R_fZ: float, n: int, bw: Bandwidths, q: int = 1,
                         kernel: KernelPair = DEFAULT_KERNEL, q2: Optional[int] = None,
                         closed_form: bool = True) -> AsymptoticConstants:
    """T_n 의 중심화 A_n 과 분산 σ_I².

    방향-선형: A_n = v_L R(K)/(n h^q g) − v_L R(f_Z)/(n h^q) − R(K) R(f_X)/(n g)
    방향-방향: A_n = v_1 v_2/(n h1^q1 h2^q2) − v_1 R(f_Y)/(n h1^q1) − v_2 R(f_X)/(n h2^q2)
    (v_L = λ_q(L²)λ_q(L)^{-2})
    """
    if n < 1:
        raise UsageError(f"n must be positive, got {n}")
    if not (R_fX > 0 and R_fZ > 0):
        raise UsageError(f"roughness values must be positive, got {R_fX}, {R_fZ}")
    if q not in (1, 2):
        raise NumericError(f"unsupported dimension q={q} for the asymptotic constants")
    h, second = bw.h, bw.second
    closed = kernel.has_closed_forms and closed_form
    v1 = _directional_volume(kernel, q)
    if bw.is_dirdir:
        q2 = q2 or 1
        v2 = _directional_volume(kernel, q2)
        hq1, hq2 = h ** q, second ** q2
        A_n = (v1 * v2 / (n * hq1 * hq2) - v1 * R_fZ / (n * hq1) - v2 * R_fX / (n * hq2))
        sigma_sq = R_fX * R_fZ * _variance_factor(kernel, q, closed) * _variance_factor(kernel, q2, closed)
    else:
        q2 = None
        R_K = _linear_roughness(kernel)
        hq = h ** q
        A_n = v1 * R_K / (n * hq * second) - v1 * R_fZ / (n * hq) - R_K * R_fX / (n * second)
        linear = (8.0 * math.pi) ** -0.5 if closed else sigma_sq_kernel_factor(kernel, q)[1]
        sigma_sq = R_fX * R_fZ * _variance_factor(kernel, q, closed) * linear
    return AsymptoticConstants(A_n=A_n, sigma_I_sq=sigma_sq, n=n, h=h, g=second, q=q, q2=q2)


def check_bandwidth_ratio(bw: Bandwidths, q: int = 1) -> bool:
    """h^q/g ∈ [0.1, 10] 이 아니면 경고"""
    ratio = bw.h ** q / bw.second
    if not (0.1 <= ratio <= 10.0):
        logger.warning(f"bandwidth ratio h^q/g={ratio:.3g} outside [0.1, 10]; "
                       f"the asymptotic calibration may be unreliable")
        return False
    return True


# ── ISE 분산 σ² ──────────────────────────────────────────────────


def ise_sigma_sq(R_f: float, q: int = 1, kernel: KernelPair = DEFAULT_KERNEL,
                 dirdir: bool = False) -> float:
    """σ² = R(f)·(방향 인자)·(선형 또는 두 번째 방향 인자)"""
    directional, linear = sigma_sq_kernel_factor(kernel, q)
    return R_f * directional * (directional if dirdir else linear)


def ise_centering(bw: Bandwidths, n: int, q: int = 1, kernel: KernelPair = DEFAULT_KERNEL) -> float:
    """λ_q(L²)λ_q(L)^{-2}R(K)/(n h^q g)"""
    return kernel_constants(kernel, q, bw.h).variance_factor / (n * bw.h ** q * bw.second)


# ── φ(h,g) ──────────────────────────────────────────────────


def compute_phi(model, bw: Bandwidths, kernel: KernelPair = DEFAULT_KERNEL,
                grid: Optional[QuadratureGrid] = None) -> float:
    """φ(h,g) = a1² σ_X² h⁴ + a2² σ_Z² g⁴ + 2 a1 a2 σ_{X,Z} h² g²

    a1 = 2 b_q(L)/q, a2 = μ₂(K) (방향-방향이면 a2 = 2 b_q(L)/q).
    σ들은 모형 밀도에 대한 헤시안 대각합의 분산/공분산 (격자 적분).
    """
    if grid is None:
        grid = model_grid(model, *PHI_GRID)
    dirdir = grid.second.is_directional
    if dirdir != bw.is_dirdir:
        raise UsageError(f"bandwidths ({bw.label()}) do not match a {grid.support} grid")
    first, second = grid.points()
    f = np.asarray(model.pdf(first, second), dtype=float)
    tr_x, tr_z = hessian_traces(model.pdf, first, second, directional_second=dirdir)
    if not (np.all(np.isfinite(tr_x)) and np.all(np.isfinite(tr_z))):
        raise NumericError(f"non-finite Hessian for {getattr(model, 'model_id', 'model')}")
    w = grid.weights * f
    mass = float(np.sum(w))
    mean_x = float(np.dot(w, tr_x)) / mass
    mean_z = float(np.dot(w, tr_z)) / mass
    var_x = float(np.dot(w, (tr_x - mean_x) ** 2)) / mass
    var_z = float(np.dot(w, (tr_z - mean_z) ** 2)) / mass
    cov_xz = float(np.dot(w, (tr_x - mean_x) * (tr_z - mean_z))) / mass
    q = grid.q
    const = kernel_constants(kernel, q, bw.h)
    a1 = 2.0 * const.b_q / q
    a2 = a1 if dirdir else const.mu2_K
    h2, s2 = bw.h ** 2, bw.second ** 2
    phi = a1 * a1 * var_x * h2 * h2 + a2 * a2 * var_z * s2 * s2 + 2.0 * a1 * a2 * cov_xz * h2 * s2
    logger.debug(f"φ(h,g)={phi:.6g} (σ_X²={var_x:.4g}, σ_Z²={var_z:.4g}, σ_XZ={cov_xz:.4g})")
    return max(phi, 0.0)
