"""커널 밀도 추정.

선형, 방향, 방향-선형, 방향-방향 추정량과 leave-one-out 로그우도,
평활 연산자 LK_{h,g} f, 그리고 점별 편향/분산 전개(수치 헤시안)를 제공한다.
커널 합은 로그 공간(log-sum-exp)에서 누적한다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from models.errors import DataError, NumericError, UsageError
from models.sample import BANDWIDTH_FLOOR, Bandwidths, DirDirSample, DirLinSample
from services.kernels import DEFAULT_KERNEL, KernelPair
from services.quadrature import QuadratureGrid
from services.special_math import kernel_constants, log_normalizing_constant

logger = logging.getLogger(__name__)

HESSIAN_STEP = 1e-4


# ── 커널 가중치 행렬 ──────────────────────────────────────────────────


def _as_points(x, dim: Optional[int] = None) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if dim is not None and arr.shape[1] != dim:
        raise DataError(f"evaluation point has dimension {arr.shape[1]}, expected {dim}")
    return arr, single


def _check_floor(h: float, name: str = "h") -> None:
    if not h >= BANDWIDTH_FLOOR:
        raise UsageError(f"bandwidth {name}={h} below floor {BANDWIDTH_FLOOR}")


def directional_log_kernel(x_eval: np.ndarray, X: np.ndarray, h: float,
                           kernel: KernelPair = DEFAULT_KERNEL) -> np.ndarray:
    """log[c_{h,q}(L)·L((1 - xᵀX_i)/h²)], shape (m, n)"""
    _check_floor(h)
    q = X.shape[1] - 1
    r = np.maximum(1.0 - x_eval @ X.T, 0.0) / (h * h)
    return log_normalizing_constant(kernel, q, float(h)) + kernel.log_directional(r)


def linear_log_kernel(z_eval: np.ndarray, Z: np.ndarray, g: float,
                      kernel: KernelPair = DEFAULT_KERNEL) -> np.ndarray:
    """log[K((z - Z_i)/g)/g], shape (m, n)"""
    if not g > 0:
        raise UsageError(f"bandwidth g={g} must be positive")
    u = (np.asarray(z_eval, dtype=float)[:, None] - np.asarray(Z, dtype=float)[None, :]) / g
    return kernel.log_linear(u) - math.log(g)


def _second_log_kernel(sample, second_eval, bw: Bandwidths, kernel: KernelPair) -> np.ndarray:
    if isinstance(sample, DirDirSample):
        return directional_log_kernel(second_eval, sample.y, bw.h2, kernel)
    return linear_log_kernel(second_eval, sample.z, bw.g, kernel)


def _check_bandwidth_kind(sample, bw: Bandwidths) -> None:
    if isinstance(sample, DirDirSample) != bw.is_dirdir:
        raise UsageError(f"bandwidths ({bw.label()}) do not match a {sample.support} sample")


def _mean_of_exp(log_terms: np.ndarray) -> np.ndarray:
    n = log_terms.shape[1]
    return np.exp(logsumexp(log_terms, axis=1) - math.log(n))


# ── 점별 추정량 ──────────────────────────────────────────────────


def kde_linear(sample, z, g: float, kernel: KernelPair = DEFAULT_KERNEL):
    """f̂_g(z) = (1/(n g)) Σ K((z - Z_i)/g)"""
    Z = sample.z if isinstance(sample, DirLinSample) else np.asarray(sample, dtype=float).ravel()
    if Z.size == 0:
        raise DataError("empty sample")
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    values = _mean_of_exp(linear_log_kernel(z_arr, Z, g, kernel))
    return float(values[0]) if np.ndim(z) == 0 else values


def kde_directional(sample, x, h: float, kernel: KernelPair = DEFAULT_KERNEL):
    """f̂_h(x) = (c_{h,q}(L)/n) Σ L((1 - xᵀX_i)/h²).

    vM 커널이면 (1/n) Σ f_vM(x; X_i, 1/h²)와 같다.
    """
    X = sample.x if isinstance(sample, (DirLinSample, DirDirSample)) else np.atleast_2d(np.asarray(sample, dtype=float))
    if X.shape[0] == 0:
        raise DataError("empty sample")
    pts, single = _as_points(x, X.shape[1])
    values = _mean_of_exp(directional_log_kernel(pts, X, h, kernel))
    return float(values[0]) if single else values


def kde_dirlin(sample: DirLinSample, x, z, bw: Bandwidths,
               kernel: KernelPair = DEFAULT_KERNEL):
    """f̂_{h,g}(x, z) = (c_{h,q}(L)/(n g)) Σ L((1 - xᵀX_i)/h²) K((z - Z_i)/g)"""
    if sample.n == 0:
        raise DataError("empty sample")
    _check_bandwidth_kind(sample, bw)
    pts, single = _as_points(x, sample.q + 1)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    logs = directional_log_kernel(pts, sample.x, bw.h, kernel) + linear_log_kernel(z_arr, sample.z, bw.g, kernel)
    values = _mean_of_exp(logs)
    return float(values[0]) if single else values


def kde_dirdir(sample: DirDirSample, x, y, bw: Bandwidths,
               kernel: KernelPair = DEFAULT_KERNEL):
    """방향-방향 곱커널 추정량 f̂_{h1,h2}(x, y)"""
    if sample.n == 0:
        raise DataError("empty sample")
    _check_bandwidth_kind(sample, bw)
    pts, single = _as_points(x, sample.q + 1)
    pts2, _ = _as_points(y, sample.q2 + 1)
    logs = directional_log_kernel(pts, sample.x, bw.h, kernel) + directional_log_kernel(pts2, sample.y, bw.h2, kernel)
    values = _mean_of_exp(logs)
    return float(values[0]) if single else values


def kde_joint(sample, first, second, bw: Bandwidths, kernel: KernelPair = DEFAULT_KERNEL):
    """표본 종류에 따라 kde_dirlin / kde_dirdir로 분기"""
    if isinstance(sample, DirDirSample):
        return kde_dirdir(sample, first, second, bw, kernel)
    return kde_dirlin(sample, first, second, bw, kernel)


def normal_scale_bandwidth(z) -> float:
    """정규 기준 선형 대역폭 1.06·σ·n^{-1/5}"""
    z = np.asarray(z, dtype=float)
    return 1.06 * float(np.std(z, ddof=1)) * z.size ** -0.2


# ── 격자 평가 ──────────────────────────────────────────────────


@dataclass
class KdeOnGrid:
    """격자 위의 결합 추정량과 두 주변 추정량"""
    joint: np.ndarray            # (k1, k2)
    marginal_first: np.ndarray   # (k1,)
    marginal_second: np.ndarray  # (k2,)


def kde_on_grid(sample, bw: Bandwidths, grid: QuadratureGrid,
                kernel: KernelPair = DEFAULT_KERNEL) -> KdeOnGrid:
    """곱커널 분해: f̂ = (1/n) D Sᵀ, D는 (k1, n), S는 (k2, n)"""
    grid.check_sample(sample)
    _check_bandwidth_kind(sample, bw)
    D = np.exp(directional_log_kernel(grid.first.points, sample.x, bw.h, kernel))
    S = np.exp(_second_log_kernel(sample, grid.second.points, bw, kernel))
    n = sample.n
    return KdeOnGrid(joint=D @ S.T / n, marginal_first=D.mean(axis=1), marginal_second=S.mean(axis=1))


def loo_log_likelihood(sample, bw: Bandwidths, kernel: KernelPair = DEFAULT_KERNEL) -> float:
    """Σ_i log f̂^{-i}(X_i, Z_i). 어떤 항이든 0으로 underflow 하면 -inf."""
    if sample.n < 2:
        raise DataError(f"leave-one-out likelihood needs n >= 2, got {sample.n}")
    _check_bandwidth_kind(sample, bw)
    logs = directional_log_kernel(sample.x, sample.x, bw.h, kernel)
    second = sample.y if isinstance(sample, DirDirSample) else sample.z
    logs = logs + _second_log_kernel(sample, second, bw, kernel)
    np.fill_diagonal(logs, -np.inf)
    with np.errstate(divide="ignore"):
        rows = logsumexp(logs, axis=1) - math.log(sample.n - 1)
    if not np.all(np.isfinite(rows)):
        return -math.inf
    return float(np.sum(rows))


# ── 평활 연산자 LK_{h,g} ──────────────────────────────────────────────────


def _check_grid_matches(grid: QuadratureGrid, bw: Bandwidths, dim: int) -> None:
    if bw.is_dirdir != grid.second.is_directional:
        raise DataError(f"grid/support mismatch: {grid.support} grid with bandwidths {bw.label()}")
    if grid.first.points.shape[1] != dim:
        raise DataError(f"grid/support mismatch: {grid.support} grid for a point of dimension {dim}")


def _smoothing_matrices(first_eval, second_eval, grid: QuadratureGrid, bw: Bandwidths, kernel: KernelPair):
    D = np.exp(directional_log_kernel(first_eval, grid.first.points, bw.h, kernel))
    if bw.is_dirdir:
        S = np.exp(directional_log_kernel(second_eval, grid.second.points, bw.h2, kernel))
    else:
        S = np.exp(linear_log_kernel(second_eval, grid.second.points, bw.g, kernel))
    return D * grid.first.weights, S * grid.second.weights


def smooth_density(f: Callable, x, z, bw: Bandwidths, grid: QuadratureGrid,
                   kernel: KernelPair = DEFAULT_KERNEL):
    """LK_{h,g} f(x, z) = (c_{h,q}(L)/g) ∫ L((1 - xᵀy)/h²) K((z - t)/g) f(y, t) dy dt.

    f는 (first_pts, second_pts)를 받는 벡터화 밀도 함수.
    """
    pts, single = _as_points(x)
    _check_grid_matches(grid, bw, pts.shape[1])
    if bw.is_dirdir:
        second, _ = _as_points(z)
    else:
        second = np.atleast_1d(np.asarray(z, dtype=float))
    F = grid.evaluate(f)
    if np.any(F < 0):
        raise UsageError("density to smooth must be nonnegative on the grid")
    Dw, Sw = _smoothing_matrices(pts, second, grid, bw, kernel)
    values = np.sum((Dw @ F) * Sw, axis=1)
    return float(values[0]) if single else values


def smooth_on_grid(F_inner: np.ndarray, inner_grid: QuadratureGrid, eval_grid: QuadratureGrid,
                   bw: Bandwidths, kernel: KernelPair = DEFAULT_KERNEL) -> np.ndarray:
    """내부 격자 값 F_inner를 평활해 평가 격자 (k1, k2) 행렬로 반환"""
    if inner_grid.support != eval_grid.support:
        raise DataError(f"grid/support mismatch: {inner_grid.support} vs {eval_grid.support}")
    _check_grid_matches(inner_grid, bw, eval_grid.first.points.shape[1])
    Dw, Sw = _smoothing_matrices(eval_grid.first.points, eval_grid.second.points, inner_grid, bw, kernel)
    return Dw @ F_inner @ Sw.T


# ── 편향/분산 전개 ──────────────────────────────────────────────────


def radial_laplacian(func: Callable, x: np.ndarray, step: float = HESSIAN_STEP) -> np.ndarray:
    """f(x/|x|)의 ℝ^{q+1} 라플라시안 (중앙 차분). 원 위에서는 d²f/dθ²."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    total = -2.0 * d * func(x)
    for i in range(d):
        for sign in (1.0, -1.0):
            y = x.copy()
            y[:, i] += sign * step
            y /= np.linalg.norm(y, axis=1, keepdims=True)
            total = total + func(y)
    return total / step ** 2


def hessian_traces(f: Callable, x, second, directional_second: bool = False,
                   step: float = HESSIAN_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """(tr 𝓗_x f, 𝓗_z f) 또는 방향-방향이면 (tr 𝓗_x f, tr 𝓗_y f)"""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if directional_second:
        y = np.atleast_2d(np.asarray(second, dtype=float))
        tr_x = radial_laplacian(lambda p: f(p, y), x, step)
        tr_y = radial_laplacian(lambda p: f(x, p), y, step)
        return tr_x, tr_y
    z = np.atleast_1d(np.asarray(second, dtype=float))
    tr_x = radial_laplacian(lambda p: f(p, z), x, step)
    hz = (f(x, z + step) - 2.0 * f(x, z) + f(x, z - step)) / step ** 2
    return tr_x, hz


@dataclass
class BiasVarianceExpansion:
    """점별 KDE 기댓값/분산의 점근 전개"""
    f_value: float
    trace_directional: float     # tr 𝓗_x f
    hessian_linear: float        # 𝓗_z f
    bias_directional: float      # (b_q/q) tr 𝓗_x f h²
    bias_linear: float           # ½ μ₂(K) 𝓗_z f g²
    predicted_mean: float
    predicted_variance: float


def bias_variance_expansion(f: Callable, x, z: float, bw: Bandwidths, n: int,
                            kernel: KernelPair = DEFAULT_KERNEL,
                            step: float = HESSIAN_STEP) -> BiasVarianceExpansion:
    """E f̂ ≈ f + (b_q/q) tr(𝓗_x f) h² + ½ μ₂(K) 𝓗_z f g²,
    Var f̂ ≈ λ_q(L²)λ_q(L)^{-2} R(K) f / (n h^q g)
    """
    if bw.is_dirdir:
        raise UsageError("bias/variance expansion is defined for directional-linear bandwidths")
    pts, _ = _as_points(x)
    q = pts.shape[1] - 1
    z_arr = np.atleast_1d(float(z))
    f_value = float(f(pts, z_arr)[0])
    tr_x, hz = hessian_traces(f, pts, z_arr, step=step)
    tr_x, hz = float(tr_x[0]), float(hz[0])
    if not (math.isfinite(tr_x) and math.isfinite(hz)):
        raise NumericError(f"non-finite numeric Hessian at {pts[0]}, z={z}")
    const = kernel_constants(kernel, q, bw.h)
    bias_dir = const.b_q / q * tr_x * bw.h ** 2
    bias_lin = 0.5 * const.mu2_K * hz * bw.g ** 2
    variance = const.variance_factor * f_value / (n * bw.h ** q * bw.g)
    return BiasVarianceExpansion(
        f_value=f_value,
        trace_directional=tr_x,
        hessian_linear=hz,
        bias_directional=bias_dir,
        bias_linear=bias_lin,
        predicted_mean=f_value + bias_dir + bias_lin,
        predicted_variance=variance,
    )
