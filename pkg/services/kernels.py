"""방향 커널 L과 선형 커널 K의 쌍.

기본값은 von Mises 커널 L(r)=e^{-r}와 표준 정규 커널 K.
그 외 커널(Epanechnikov형)은 상수를 수치 적분으로 계산한다.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np

from models.errors import NumericError, UsageError
from services.special_math import gauss_legendre

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _vm_L(r):
    return np.exp(-np.asarray(r, dtype=float))


def _vm_logL(r):
    return -np.asarray(r, dtype=float)


def _epa_L(r):
    return np.maximum(1.0 - np.asarray(r, dtype=float), 0.0)


def _epa_logL(r):
    with np.errstate(divide="ignore"):
        return np.log(_epa_L(r))


def _normal_K(u):
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u - _LOG_SQRT_2PI)


def _normal_logK(u):
    u = np.asarray(u, dtype=float)
    return -0.5 * u * u - _LOG_SQRT_2PI


def _epa_K(u):
    u = np.asarray(u, dtype=float)
    return 0.75 * np.maximum(1.0 - u * u, 0.0)


def _epa_logK(u):
    with np.errstate(divide="ignore"):
        return np.log(_epa_K(u))


# 이름 → (함수, 로그 함수)
DIRECTIONAL_KERNELS: Dict[str, Tuple[Callable, Callable]] = {
    "vonMises": (_vm_L, _vm_logL),
    "epanechnikov": (_epa_L, _epa_logL),
}

LINEAR_KERNELS: Dict[str, Tuple[Callable, Callable]] = {
    "normal": (_normal_K, _normal_logK),
    "epanechnikov": (_epa_K, _epa_logK),
}

# 질량 점검 구간 (지지집합 반폭)
LINEAR_KERNEL_SPANS = {"normal": 12.0, "epanechnikov": 1.0}


@dataclass(frozen=True)
class KernelPair:
    """방향-선형 커널 쌍 (L, K). 방향-방향 추정에서는 두 방향 성분 모두 L을 쓴다."""
    directional_name: str
    linear_name: str
    directional: Callable
    linear: Callable
    log_directional: Callable
    log_linear: Callable

    @property
    def name(self) -> str:
        return f"{self.directional_name}/{self.linear_name}"

    @property
    def is_von_mises(self) -> bool:
        return self.directional_name == "vonMises"

    @property
    def is_normal(self) -> bool:
        return self.linear_name == "normal"

    @property
    def has_closed_forms(self) -> bool:
        """vM + 정규 조합만 닫힌 형태 상수를 가진다"""
        return self.is_von_mises and self.is_normal


@lru_cache(maxsize=None)
def make_kernel_pair(directional: str = "vonMises", linear: str = "normal") -> KernelPair:
    """이름으로 커널 쌍 생성 (같은 이름이면 같은 객체 → 상수 캐시 공유)"""
    if directional not in DIRECTIONAL_KERNELS:
        raise UsageError(f"unknown directional kernel {directional!r}; "
                         f"choose from {sorted(DIRECTIONAL_KERNELS)}")
    if linear not in LINEAR_KERNELS:
        raise UsageError(f"unknown linear kernel {linear!r}; choose from {sorted(LINEAR_KERNELS)}")
    L, logL = DIRECTIONAL_KERNELS[directional]
    K, logK = LINEAR_KERNELS[linear]
    pair = KernelPair(directional, linear, L, K, logL, logK)
    validate_kernel(pair)
    return pair


def validate_kernel(kernel: KernelPair) -> None:
    """L 비음수·비증가, K 대칭·정규화 점검"""
    r = np.linspace(0.0, 60.0, 2001)
    L = kernel.directional(r)
    if np.any(L < 0) or np.any(np.diff(L) > 1e-15):
        raise NumericError(f"directional kernel {kernel.directional_name} must be nonnegative and nonincreasing")
    u = np.linspace(-12.0, 12.0, 2001)
    K = kernel.linear(u)
    if np.any(K < 0) or not np.allclose(K, kernel.linear(-u), rtol=0, atol=1e-15):
        raise NumericError(f"linear kernel {kernel.linear_name} must be a symmetric density")
    span = LINEAR_KERNEL_SPANS[kernel.linear_name]
    nodes, weights = gauss_legendre(400, -span, span)
    mass = float(np.dot(weights, kernel.linear(nodes)))
    if abs(mass - 1.0) > 1e-10:
        raise NumericError(f"linear kernel {kernel.linear_name} integrates to {mass}, not 1")


DEFAULT_KERNEL = make_kernel_pair()
