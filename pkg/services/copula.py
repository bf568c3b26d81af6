"""원형 링크 코퓰라.

링크 코퓰라 c_g(u, v) = 2π g(2π(u ± v))와 그 변환 표본추출,
그리고 QS 코퓰라 1 + 2πα cos(2πu)(1 − 2v)의 조건부 역변환 표본추출.
"""

import math
from typing import Tuple

import numpy as np

from models.errors import UsageError
from services.circular_densities import CircularDensity
from services.special_math import TWO_PI


def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise UsageError(f"link sign must be +1 or -1, got {sign}")


def link_angle(u, v, sign: int):
    """Ψ = 2π(u ± v) mod 2π"""
    _check_sign(sign)
    return np.mod(TWO_PI * (np.asarray(u, dtype=float) + sign * np.asarray(v, dtype=float)), TWO_PI)


def link_copula_density(g: CircularDensity, u, v, sign: int):
    return TWO_PI * g.pdf(link_angle(u, v, sign))


def sample_link_copula(g: CircularDensity, sign: int, n: int,
                       rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(U, V) ~ c_g.

    Ψ ~ g, V ~ U(0,1), U = ((Ψ ∓ 2πV) mod 2π) / 2π
    """
    _check_sign(sign)
    psi = g.sample(n, rng)
    v = rng.uniform(size=n)
    u = np.mod(psi - sign * TWO_PI * v, TWO_PI) / TWO_PI
    return u, v


# ── QS 코퓰라 ──────────────────────────────────────────────────

QS_ALPHA = 1.0 / TWO_PI


def check_qs_alpha(alpha: float) -> None:
    if not math.isclose(alpha, QS_ALPHA, rel_tol=0.0, abs_tol=1e-12):
        raise UsageError(f"QS copula supports alpha = 1/(2π) only, got {alpha}")


def qs_copula_density(u, v, alpha: float = QS_ALPHA):
    check_qs_alpha(alpha)
    return 1.0 + TWO_PI * alpha * np.cos(TWO_PI * np.asarray(u, dtype=float)) * (1.0 - 2.0 * np.asarray(v, dtype=float))


def sample_qs_copula(n: int, rng: np.random.Generator,
                     alpha: float = QS_ALPHA) -> Tuple[np.ndarray, np.ndarray]:
    """U ~ U(0,1), V | U는 c(v|u) = 1 + a(1 − 2v)의 이차식 역함수 (a = 2πα cos 2πU)"""
    check_qs_alpha(alpha)
    u = rng.uniform(size=n)
    w = rng.uniform(size=n)
    a = TWO_PI * alpha * np.cos(TWO_PI * u)
    # a v² − (1 + a) v + w = 0 의 [0, 1] 근
    safe = np.abs(a) > 1e-12
    a_safe = np.where(safe, a, 1.0)
    disc = np.maximum((1.0 + a_safe) ** 2 - 4.0 * a_safe * w, 0.0)
    root = ((1.0 + a_safe) - np.sqrt(disc)) / (2.0 * a_safe)
    v = np.where(safe, root, w)
    return u, np.clip(v, 0.0, 1.0)
