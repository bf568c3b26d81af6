"""우도 교차검증(LCV) 대역폭 선택.

로그 간격 격자 탐색 후 격자 최댓값에서 Nelder–Mead로 다듬는다.
격자 최댓값이 탐색 상자 경계에 있으면 경계값을 그대로 돌려주고 boundary_hit을 표시한다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from models.errors import DataError, NumericError
from models.sample import BANDWIDTH_FLOOR, Bandwidths, DirDirSample
from services.kde import loo_log_likelihood
from services.kernels import DEFAULT_KERNEL, KernelPair

logger = logging.getLogger(__name__)

LCV_GRID_SIZE = 16
LCV_POLISH_EVALS = 200

Box = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass
class LcvScan:
    """격자 위 LOO 로그우도 표"""
    h_values: np.ndarray
    second_values: np.ndarray
    objective: np.ndarray      # (len(h_values), len(second_values))

    def argmax(self) -> Tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.objective)), self.objective.shape)
        return int(i), int(j)

    @property
    def best(self) -> float:
        return float(np.max(self.objective))


def default_search_box(sample) -> Box:
    """방향 대역폭 [0.02, 3], 선형 대역폭 [0.02, 3]·표준편차"""
    h_box = (max(0.02, BANDWIDTH_FLOOR), 3.0)
    if isinstance(sample, DirDirSample):
        return h_box, h_box
    sd = float(np.std(sample.z, ddof=1))
    if not sd > 0:
        raise NumericError("degenerate sample for LCV: linear component has zero spread")
    return h_box, (0.02 * sd, 3.0 * sd)


def _make_bw(dirdir: bool, h: float, second: float, boundary_hit: bool = False) -> Bandwidths:
    if dirdir:
        return Bandwidths.dirdir(h, second, boundary_hit)
    return Bandwidths.dirlin(h, second, boundary_hit)


def lcv_grid_scan(sample, kernel: KernelPair = DEFAULT_KERNEL, search_box: Optional[Box] = None,
                  size: int = LCV_GRID_SIZE) -> LcvScan:
    dirdir = isinstance(sample, DirDirSample)
    box = search_box or default_search_box(sample)
    hs = np.geomspace(box[0][0], box[0][1], size)
    ss = np.geomspace(box[1][0], box[1][1], size)
    values = np.empty((size, size))
    for i, h in enumerate(hs):
        for j, s in enumerate(ss):
            values[i, j] = loo_log_likelihood(sample, _make_bw(dirdir, h, s), kernel)
    return LcvScan(h_values=hs, second_values=ss, objective=values)


def lcv_bandwidths(sample, kernel: KernelPair = DEFAULT_KERNEL, search_box: Optional[Box] = None,
                   size: int = LCV_GRID_SIZE) -> Bandwidths:
    """argmax_{h,g} Σ log f̂^{-i}(X_i, Z_i)"""
    if sample.n < 3:
        raise DataError(f"insufficient data: LCV needs n >= 3, got {sample.n}")
    dirdir = isinstance(sample, DirDirSample)
    box = search_box or default_search_box(sample)
    scan = lcv_grid_scan(sample, kernel, box, size)
    if not np.isfinite(scan.best):
        raise NumericError("degenerate sample for LCV: leave-one-out likelihood is -inf on the whole grid")
    i, j = scan.argmax()
    h0, s0 = float(scan.h_values[i]), float(scan.second_values[j])
    if i in (0, size - 1) or j in (0, size - 1):
        logger.warning(f"LCV optimum on the search box boundary ({_make_bw(dirdir, h0, s0).label()})")
        return _make_bw(dirdir, h0, s0, boundary_hit=True)

    lo = np.log([box[0][0], box[1][0]])
    hi = np.log([box[0][1], box[1][1]])

    def objective(t):
        if np.any(t < lo) or np.any(t > hi):
            return math.inf
        value = loo_log_likelihood(sample, _make_bw(dirdir, math.exp(t[0]), math.exp(t[1])), kernel)
        return -value if math.isfinite(value) else math.inf

    res = optimize.minimize(objective, np.log([h0, s0]), method="Nelder-Mead",
                            options={"maxfev": LCV_POLISH_EVALS, "xatol": 1e-4, "fatol": 1e-8})
    if math.isfinite(res.fun) and -res.fun >= scan.best:
        h, s = math.exp(res.x[0]), math.exp(res.x[1])
    else:
        h, s = h0, s0
    bw = _make_bw(dirdir, h, s)
    logger.debug(f"LCV bandwidths {bw.label()} (grid cell {i},{j})")
    return bw


def median_lcv_bandwidths(model, n: int, draws: int, rng: np.random.Generator,
                          kernel: KernelPair = DEFAULT_KERNEL) -> Bandwidths:
    """모형에서 draws개 표본의 LCV 대역폭 좌표별 중앙값"""
    hs, ss = [], []
    for _ in range(draws):
        bw = lcv_bandwidths(model.sample(n, rng), kernel)
        hs.append(bw.h)
        ss.append(bw.second)
    return _make_bw(model.is_dirdir, float(np.median(hs)), float(np.median(ss)))
