"""곱공간 수치 적분 격자.

Ω_1 × ℝ (CircleLine), Ω_2 × ℝ (SphereLine), Ω_1 × Ω_1 (CircleCircle) 위의
곱 격자 노드/가중치와 적분 함수를 제공한다.

- 원: 균등 사다리꼴 (주기 함수에 대해 스펙트럴 정확도)
- 2-구면: cos(여위도) Gauss–Legendre × 균등 경도
- 직선: [c - T·s, c + T·s] 위의 Gauss–Legendre
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from models.errors import DataError, NumericError, UsageError
from models.sample import (
    SUPPORT_CIRCLE_CIRCLE,
    SUPPORT_CIRCLE_LINE,
    SUPPORT_SPHERE_LINE,
    SUPPORTS,
    DirDirSample,
)
from services.special_math import gauss_legendre

logger = logging.getLogger(__name__)

DEFAULT_CIRCLE_NODES = 256
DEFAULT_SPHERE_NODES = (64, 128)
DEFAULT_LINE_NODES = 96
DEFAULT_TRUNCATION = 7.0


@dataclass(frozen=True)
class GridFactor:
    """곱 격자의 한 축 (circle | sphere | line)"""
    kind: str
    points: np.ndarray    # circle/sphere: (k, d) 단위 벡터, line: (k,)
    weights: np.ndarray   # (k,)
    lower: Optional[float] = None   # line 구간
    upper: Optional[float] = None
    shape_hint: tuple = ()          # sphere: (n_t, n_phi)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def is_directional(self) -> bool:
        return self.kind != "line"

    @property
    def angles(self) -> np.ndarray:
        if self.kind != "circle":
            raise UsageError("angles are only defined for circle factors")
        return np.mod(np.arctan2(self.points[:, 1], self.points[:, 0]), 2 * np.pi)

    def integrate(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        _check_finite(values, self.points, None)
        return float(np.dot(self.weights, values))


def circle_factor(k: int = DEFAULT_CIRCLE_NODES) -> GridFactor:
    theta = 2.0 * np.pi * np.arange(k) / k
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return GridFactor(kind="circle", points=pts, weights=np.full(k, 2.0 * np.pi / k))


def sphere_factor(n_t: int = DEFAULT_SPHERE_NODES[0], n_phi: int = DEFAULT_SPHERE_NODES[1]) -> GridFactor:
    t, wt = gauss_legendre(n_t, -1.0, 1.0)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    s = np.sqrt(1.0 - tt ** 2)
    pts = np.stack([s * np.cos(pp), s * np.sin(pp), tt], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    return GridFactor(kind="sphere", points=pts, weights=w, shape_hint=(n_t, n_phi))


def line_factor(k: int = DEFAULT_LINE_NODES, center: float = 0.0, scale: float = 1.0,
                truncation: float = DEFAULT_TRUNCATION) -> GridFactor:
    if not scale > 0:
        raise UsageError(f"line scale must be positive, got {scale}")
    lo, hi = center - truncation * scale, center + truncation * scale
    return line_factor_interval(k, lo, hi)


def line_factor_interval(k: int, lower: float, upper: float) -> GridFactor:
    if not upper > lower:
        raise UsageError(f"empty line interval [{lower}, {upper}]")
    nodes, weights = gauss_legendre(int(k), float(lower), float(upper))
    return GridFactor(kind="line", points=np.asarray(nodes), weights=np.asarray(weights),
                      lower=float(lower), upper=float(upper))


def _refine_factor(factor: GridFactor, multiple: int) -> GridFactor:
    if factor.kind == "circle":
        return circle_factor(factor.size * multiple)
    if factor.kind == "sphere":
        n_t, n_phi = factor.shape_hint
        return sphere_factor(n_t * multiple, n_phi * multiple)
    return line_factor_interval(factor.size * multiple, factor.lower, factor.upper)


# ── 곱 격자 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class QuadratureGrid:
    """곱공간 적분 격자. 노드는 first × second의 모든 쌍."""
    support: str
    first: GridFactor
    second: GridFactor
    line_truncation: Optional[float] = None

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise UsageError(f"unknown support {self.support!r}")

    @property
    def shape(self) -> tuple:
        return (self.first.size, self.second.size)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.first.weights, self.second.weights).ravel()

    @property
    def q(self) -> int:
        return self.first.points.shape[1] - 1

    def points(self):
        """평탄화된 노드 쌍 (first_pts (N, d1), second_pts (N,) 또는 (N, d2))"""
        k1, k2 = self.shape
        first = np.repeat(self.first.points, k2, axis=0)
        if self.second.is_directional:
            second = np.tile(self.second.points, (k1, 1))
        else:
            second = np.tile(self.second.points, k1)
        return first, second

    def evaluate(self, f: Callable) -> np.ndarray:
        """f(first_pts, second_pts)를 (k1, k2) 행렬로 평가"""
        first, second = self.points()
        values = np.asarray(f(first, second), dtype=float).reshape(self.shape)
        return values

    def refined(self, multiple: int = 2) -> 'QuadratureGrid':
        return replace(self, first=_refine_factor(self.first, multiple),
                       second=_refine_factor(self.second, multiple))

    def describe(self) -> str:
        text = f"{self.support} {self.first.size}x{self.second.size}"
        if self.line_truncation is not None:
            text += f" T={self.line_truncation:g}"
        return text

    def check_sample(self, sample) -> None:
        if sample.support != self.support:
            raise DataError(f"grid/support mismatch: sample is {sample.support}, grid is {self.support}")


def make_grid(support: str, n_first: Optional[int] = None, n_second: Optional[int] = None,
              center: float = 0.0, scale: float = 1.0,
              truncation: float = DEFAULT_TRUNCATION) -> QuadratureGrid:
    """지지집합별 기본 격자 생성"""
    if support == SUPPORT_CIRCLE_LINE:
        return QuadratureGrid(
            support=support,
            first=circle_factor(n_first or DEFAULT_CIRCLE_NODES),
            second=line_factor(n_second or DEFAULT_LINE_NODES, center, scale, truncation),
            line_truncation=truncation,
        )
    if support == SUPPORT_SPHERE_LINE:
        n_t = n_first or DEFAULT_SPHERE_NODES[0]
        return QuadratureGrid(
            support=support,
            first=sphere_factor(n_t, 2 * n_t),
            second=line_factor(n_second or DEFAULT_LINE_NODES, center, scale, truncation),
            line_truncation=truncation,
        )
    if support == SUPPORT_CIRCLE_CIRCLE:
        return QuadratureGrid(
            support=support,
            first=circle_factor(n_first or DEFAULT_CIRCLE_NODES),
            second=circle_factor(n_second or DEFAULT_CIRCLE_NODES),
        )
    raise UsageError(f"no quadrature grid for support {support!r}")


def grid_for_sample(sample, n_first: int = 128, n_second: int = 96,
                    truncation: float = DEFAULT_TRUNCATION) -> QuadratureGrid:
    """통계량 격자. 직선 축은 표본 평균 ± T·표준편차."""
    if isinstance(sample, DirDirSample):
        return make_grid(sample.support, n_first, n_second)
    z = sample.z
    scale = float(np.std(z))
    if not scale > 0:
        scale = 1.0
        logger.warning("degenerate linear component; using unit scale for the line grid")
    return make_grid(sample.support, n_first, n_second,
                     center=float(np.mean(z)), scale=scale, truncation=truncation)


# ── 적분 ──────────────────────────────────────────────────


def _check_finite(values: np.ndarray, first, second) -> None:
    bad = np.flatnonzero(~np.isfinite(values.ravel()))
    if bad.size == 0:
        return
    i = int(bad[0])
    if second is None:
        where = f"node {i} ({first[i]})"
    else:
        where = f"node {i} (first={first[i]}, second={second[i]})"
    raise NumericError(f"non-finite integrand value {values.ravel()[i]} at {where}")


def integrate(grid: QuadratureGrid, f: Callable) -> float:
    """Σ w_i f(node_i). f는 (first_pts, second_pts)를 받는 벡터화 함수."""
    first, second = grid.points()
    values = np.asarray(f(first, second), dtype=float).ravel()
    _check_finite(values, first, second)
    return float(np.dot(grid.weights, values))


def integrate_values(grid: QuadratureGrid, values: np.ndarray) -> float:
    """격자 위에서 미리 계산된 (k1, k2) 값 행렬의 적분"""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise NumericError(f"value matrix {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        first, second = grid.points()
        _check_finite(values, first, second)
    return float(grid.first.weights @ values @ grid.second.weights)


def line_mass(center: float, scale: float, truncation: float, k: int = DEFAULT_LINE_NODES) -> float:
    """표준 정규 밀도를 절단된 직선 축에서 적분 (절단 질량 점검용)"""
    factor = line_factor(k, center, scale, truncation)
    z = factor.points
    return factor.integrate(np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi))
