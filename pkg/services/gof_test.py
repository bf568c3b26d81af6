"""적합도 검정 R_n = ∫ (f̂_{h,g} − LK_{h,g} f_θ̂)² 과 모수적 부트스트랩 보정.

절차:
  1. θ̂ 적합 (단순 귀무가설이면 θ₀ 사용, 적합 생략)
  2. R_n 계산
  3. b = 1..B: f_θ̂ 에서 표본 생성 → θ̂* 재적합 → R_n^{*b}
  4. p = #{R_n ≤ R_n^{*b}} / B

대역폭은 부트스트랩 반복 내내 고정 (reselect_bandwidths=True 이면 반복마다 LCV 재선택).
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from models.errors import DataError, NumericError, UsageError
from models.results import TestReport
from models.sample import Bandwidths
from services.bandwidth import lcv_bandwidths
from services.calibration import empirical_p_value, failure_flag, run_replicates
from services.independence_test import statistic_grid
from services.joint_fitting import fit_joint, fitted_model
from services.kde import kde_on_grid, smooth_on_grid
from services.kernels import DEFAULT_KERNEL, KernelPair
from services.model_catalog import JointModel, make_model, model_grid
from services.quadrature import QuadratureGrid, integrate_values
from services.rng_streams import make_stream

logger = logging.getLogger(__name__)

# 평활용 내부 격자 (원×직선, 토러스)
INNER_GRID = (256, 384)
INNER_TORUS_GRID = (256, 256)
INNER_TAIL = 1e-7


# ── LK_{h,g} f_θ ──────────────────────────────────────────────────


@dataclass
class ModelOnGrid:
    """내부 격자 위에서 한 번 평가한 모형 밀도 (평활 재사용용)"""
    model: JointModel
    grid: QuadratureGrid
    values: np.ndarray

    @classmethod
    def of(cls, model: JointModel) -> 'ModelOnGrid':
        shape = INNER_TORUS_GRID if model.is_dirdir else INNER_GRID
        grid = model_grid(model, *shape, tail=INNER_TAIL)
        values = grid.evaluate(model.pdf)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise NumericError(f"{model.model_id}: density is not finite and nonnegative on the inner grid")
        return cls(model=model, grid=grid, values=values)


def smoothed_model_on_grid(model: Union[JointModel, ModelOnGrid], bw: Bandwidths, grid: QuadratureGrid,
                           kernel: KernelPair = DEFAULT_KERNEL) -> np.ndarray:
    """LK_{h,g} f_θ 를 통계량 격자 (k1, k2) 위에서 계산"""
    inner = model if isinstance(model, ModelOnGrid) else ModelOnGrid.of(model)
    return smooth_on_grid(inner.values, inner.grid, grid, bw, kernel)


# ── R_n ──────────────────────────────────────────────────


def gof_statistic(sample, smoothed: np.ndarray, bw: Bandwidths, kernel: KernelPair = DEFAULT_KERNEL,
                  grid: Optional[QuadratureGrid] = None) -> float:
    """R_n. smoothed는 같은 격자 위의 LK_{h,g} f_θ̂ 값."""
    grid = grid or statistic_grid(sample)
    if smoothed.shape != grid.shape:
        raise DataError(f"grid mismatch: smoothed model is {smoothed.shape}, grid is {grid.shape}")
    kde = kde_on_grid(sample, bw, grid, kernel)
    diff = kde.joint - smoothed
    return max(integrate_values(grid, diff * diff), 0.0)


def _resolve_model(model: Union[str, JointModel]) -> JointModel:
    return make_model(model) if isinstance(model, str) else model


def gof_bootstrap_test(sample, model: Union[str, JointModel], bw: Optional[Bandwidths] = None,
                       kernel: KernelPair = DEFAULT_KERNEL, B: int = 200,
                       rng: Optional[np.random.Generator] = None, seed: Optional[int] = None,
                       simple_theta0: Optional[Dict[str, float]] = None,
                       reselect_bandwidths: bool = False,
                       grid_shape: Optional[Tuple[int, int]] = None, truncation: float = 7.0,
                       threads: int = 1, progress_callback: Optional[Callable] = None) -> TestReport:
    """모수적 부트스트랩 적합도 검정.

    simple_theta0가 주어지면 단순 귀무가설 f_{θ₀}: 적합과 재적합을 모두 생략한다.
    재적합 실패(예외 또는 비수렴)는 해당 반복을 버리고, 10% 초과면 보고서를 표시한다.
    """
    if B < 1:
        raise UsageError(f"B must be >= 1, got {B}")
    base = _resolve_model(model)
    if base.support != sample.support:
        raise DataError(f"support mismatch: {base.model_id} is {base.support}, sample is {sample.support}")
    started = time.perf_counter()

    def _notify(event: str, data: dict):
        if progress_callback:
            progress_callback(event, data)

    if rng is None:
        seed = 0 if seed is None else seed
        rng = make_stream(seed, "gof_test", base.model_id)
    shape = grid_shape or (None, None)

    def _grid(s) -> QuadratureGrid:
        return statistic_grid(s, shape[0], shape[1], truncation)

    # 1. 적합
    _notify("phase_start", {"phase": "fit", "model": base.model_id})
    if simple_theta0 is not None:
        fit = None
        null_model = base.with_params(simple_theta0)
    else:
        fit = fit_joint(base, sample, rng)
        if not fit.converged:
            logger.warning(f"{base.model_id}: original fit did not converge; continuing with best-found θ̂")
        null_model = fitted_model(base, fit)

    rule = "fixed"
    if bw is None:
        bw = lcv_bandwidths(sample, kernel)
        rule = "LCV"

    # 2. R_n
    grid = _grid(sample)
    null_on_grid = ModelOnGrid.of(null_model)
    R_n = gof_statistic(sample, smoothed_model_on_grid(null_on_grid, bw, grid, kernel), bw, kernel, grid)

    # 3. 부트스트랩
    warm_start = dict(fit.theta_hat) if fit is not None else None

    def task(b: int, r: np.random.Generator) -> float:
        boot = null_model.sample(sample.n, r)
        bw_b = lcv_bandwidths(boot, kernel) if reselect_bandwidths else bw
        grid_b = _grid(boot)
        if fit is None:
            inner = null_on_grid
        else:
            fit_b = fit_joint(base, boot, r, start=warm_start, restarts=0)
            if not fit_b.converged:
                raise NumericError(f"refit did not converge (log-likelihood {fit_b.log_likelihood:.6g})")
            inner = ModelOnGrid.of(fitted_model(base, fit_b))
        return gof_statistic(boot, smoothed_model_on_grid(inner, bw_b, grid_b, kernel), bw_b, kernel, grid_b)

    _notify("phase_start", {"phase": "bootstrap", "B": B})
    values = run_replicates(task, B, rng, threads, "bootstrap replicate", progress_callback)
    kept = [v for v in values if v is not None]
    n_failed = B - len(kept)
    flagged = failure_flag(n_failed, B, f"{base.model_id} goodness-of-fit bootstrap")
    p_value = empirical_p_value(R_n, kept)

    elapsed = time.perf_counter() - started
    logger.info(f"goodness-of-fit test {base.model_id}: R_n={R_n:.6g}, p={p_value:.4f}, "
                f"B={len(kept)}, {bw.label()}, {elapsed:.2f}s")
    _notify("complete", {"statistic": R_n, "p_value": p_value})
    return TestReport(
        statistic_name="R_n", statistic=R_n, p_value=p_value, method="bootstrap", B=len(kept),
        bandwidths=bw, bandwidth_rule=rule, seed=seed, fit=fit, elapsed=elapsed,
        model_id=base.model_id, n=sample.n, grid=grid.describe(), flagged=flagged,
        n_failed=n_failed, replicates=kept,
        extras={"simple_null": 1.0 if simple_theta0 is not None else 0.0},
    )
