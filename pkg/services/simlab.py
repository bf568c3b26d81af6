"""몬테카를로 실험과 데이터 분석 워크플로.

각 반복의 난수 스트림은 (실험, 모델, n, δ, 반복 번호)로 결정되므로
결과 CSV는 스레드 수와 무관하게 동일하다.
"""

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import special, stats

from models.errors import DirLinError, UsageError
from models.experiment import ExperimentConfig, ResultRow
from models.results import TestReport
from models.sample import SUPPORT_CIRCLE_LINE, Bandwidths
from services.asymptotics import (
    asymptotic_constants,
    compute_phi,
    ise_centering,
    ise_sigma_sq,
    roughness,
)
from services.bandwidth import median_lcv_bandwidths
from services.calibration import FAILURE_FLAG_FRACTION, failure_flag, run_keyed
from services.circular_densities import CircularDensity, LinearDensity
from services.config import write_resolved_config
from services.dataset_io import read_sample
from services.gof_test import ModelOnGrid, gof_bootstrap_test, smoothed_model_on_grid
from services.independence_test import indep_statistic, statistic_grid
from services.kde import kde_on_grid
from services.kernels import DEFAULT_KERNEL, KernelPair
from services.model_catalog import (
    JointModel,
    custom_model,
    make_alternative,
    make_model,
    parse_custom,
)
from services.quadrature import circle_factor, integrate_values, make_grid
from services.rng_streams import make_stream
from services.special_math import kernel_constants, sigma_sq_kernel_factor
from ui.export import frame_to_csv, write_report, write_result_rows, write_text
from ui.plots import plot_clt_histogram, plot_model_contour, plot_rate_heatmap

logger = logging.getLogger(__name__)


def _bandwidths(dirdir: bool, pair: Tuple[float, float]) -> Bandwidths:
    return Bandwidths.dirdir(*pair) if dirdir else Bandwidths.dirlin(*pair)


def _grid_shape(config: ExperimentConfig, dirdir: bool) -> Tuple[int, int]:
    if dirdir:
        return config.grid_torus, config.grid_torus
    return config.grid_circle, config.grid_line


def primary_alpha(config: ExperimentConfig) -> float:
    """곡면 실험에 쓰는 단일 수준 (0.05가 있으면 0.05)"""
    return 0.05 if 0.05 in config.alpha_list else config.alpha_list[0]


def _out_path(config: ExperimentConfig, name: str) -> str:
    return os.path.join(config.out_dir, name)


# ── 크기/검정력 ──────────────────────────────────────────────────


@dataclass
class ScenarioOutcome:
    """한 (모델, n, δ) 시나리오의 부트스트랩 p-값들"""
    model_id: str
    n: int
    delta: float
    p_values: List[float]
    n_failed: int
    n_flagged_reports: int
    bandwidth_rule: str
    elapsed: float

    @property
    def M(self) -> int:
        return len(self.p_values) + self.n_failed

    def rows(self, config: ExperimentConfig) -> List[ResultRow]:
        """수준별 기각률 행 (실패 반복은 분모에서 제외)"""
        kept = len(self.p_values)
        flagged = (failure_flag(self.n_failed, self.M, f"{self.model_id} n={self.n} δ={self.delta:g}")
                   or self.n_flagged_reports > FAILURE_FLAG_FRACTION * max(kept, 1))
        rows = []
        for alpha in config.alpha_list:
            rejections = sum(p < alpha for p in self.p_values)
            common = dict(elapsed=self.elapsed, seed=config.master_seed, B=config.B,
                          bandwidth_rule=self.bandwidth_rule, flagged=flagged, n_failed=self.n_failed)
            if kept == 0:
                rows.append(ResultRow(self.model_id, self.n, self.delta, alpha, math.nan, math.nan, M=0, **common))
            else:
                rows.append(ResultRow.from_rejections(self.model_id, self.n, self.delta, alpha,
                                                      rejections, kept, **common))
        return rows


def scenario_bandwidths(config: ExperimentConfig, alternative, n: int, kernel: KernelPair) -> Optional[Bandwidths]:
    """fixed/medianLCV는 시나리오 고정 대역폭, LCV는 None (표본마다 선택)"""
    if config.bandwidth_rule == "fixed":
        return _bandwidths(alternative.is_dirdir, config.bandwidths)
    if config.bandwidth_rule == "medianLCV":
        rng = make_stream(config.master_seed, "medianLCV", alternative.model_id, n, alternative.delta)
        bw = median_lcv_bandwidths(alternative, n, config.median_lcv_draws, rng, kernel)
        logger.info(f"{alternative.label} n={n}: median LCV bandwidths {bw.label()}")
        return bw
    return None


def simulate_p_values(config: ExperimentConfig, model_id: str, n: int, delta: float,
                      kernel: KernelPair = DEFAULT_KERNEL,
                      progress_callback: Optional[Callable] = None) -> ScenarioOutcome:
    """H_δ에서 M개 표본을 뽑아 각각 부트스트랩 적합도 검정"""
    started = time.perf_counter()
    base = make_model(model_id)
    alternative = make_alternative(base, delta)
    bw = scenario_bandwidths(config, alternative, n, kernel)
    shape = _grid_shape(config, base.is_dirdir)

    def stream_for(m: int) -> np.random.Generator:
        return make_stream(config.master_seed, "sizePower", model_id, n, delta, m)

    def task(m: int, rng: np.random.Generator) -> TestReport:
        sample = alternative.sample(n, rng)
        return gof_bootstrap_test(sample, base, bw, kernel, B=config.B, rng=rng, grid_shape=shape,
                                  truncation=config.truncation,
                                  reselect_bandwidths=config.reselect_bandwidths)

    reports = run_keyed(task, config.M, stream_for, config.threads,
                        f"{model_id} n={n} δ={delta:g} replicate", progress_callback)
    kept = [r for r in reports if r is not None]
    return ScenarioOutcome(
        model_id=model_id, n=n, delta=delta,
        p_values=[r.p_value for r in kept],
        n_failed=config.M - len(kept),
        n_flagged_reports=sum(r.flagged for r in kept),
        bandwidth_rule=config.bandwidth_rule,
        elapsed=time.perf_counter() - started,
    )


P_VALUE_COLUMNS = ["model_id", "n", "delta", "replicate", "p_value"]


def run_size_power(config: ExperimentConfig, kernel: KernelPair = DEFAULT_KERNEL, write: bool = True,
                   progress_callback: Optional[Callable] = None) -> List[ResultRow]:
    """모델 × n × δ 시나리오별 기각률 표"""

    def _notify(event: str, data: dict):
        if progress_callback:
            progress_callback(event, data)

    rows: List[ResultRow] = []
    p_records: List[dict] = []
    scenarios = [(m, n, d) for m in config.models for n in config.n_list for d in config.delta_list]
    logger.info(f"size/power: {len(scenarios)} scenarios, M={config.M}, B={config.B}, "
                f"rule={config.bandwidth_rule}, seed={config.master_seed}")
    for idx, (model_id, n, delta) in enumerate(scenarios):
        _notify("phase_start", {"model": model_id, "n": n, "delta": delta, "index": idx,
                                "total": len(scenarios)})
        outcome = simulate_p_values(config, model_id, n, delta, kernel)
        cell_rows = outcome.rows(config)
        rows.extend(cell_rows)
        p_records.extend({"model_id": model_id, "n": n, "delta": delta, "replicate": i, "p_value": p}
                         for i, p in enumerate(outcome.p_values))
        rates = ", ".join(f"α={r.alpha:g}: {r.rejection_rate:.3f}" for r in cell_rows)
        logger.info(f"{model_id} n={n} δ={delta:g}: {rates} ({outcome.elapsed:.1f}s)")
        _notify("cell_done", {"model": model_id, "n": n, "delta": delta, "rows": cell_rows})

    if write:
        write_result_rows(rows, _out_path(config, "size_power.csv"))
        frame_to_csv(pd.DataFrame(p_records, columns=P_VALUE_COLUMNS), _out_path(config, "size_power_pvalues.csv"))
        write_resolved_config(config, _out_path(config, "size_power_config.txt"))
    _notify("complete", {"rows": len(rows)})
    return rows


# ── 대역폭 격자 ──────────────────────────────────────────────────


@dataclass
class BandwidthGridResult:
    frame: pd.DataFrame                                  # h, g, delta, alpha, rate, mc_se, M, B, n_failed
    digests: Dict[Tuple[int, int, float], List[str]] = field(default_factory=dict)


BANDWIDTH_GRID_COLUMNS = ["h", "g", "delta", "alpha", "rate", "mc_se", "M", "B", "n_failed"]


def run_bandwidth_grid(config: ExperimentConfig, kernel: KernelPair = DEFAULT_KERNEL, write: bool = True,
                       progress_callback: Optional[Callable] = None) -> BandwidthGridResult:
    """로그 간격 (h, g) 격자 위 기각률 곡면. 같은 M개 표본을 모든 격자 칸에서 재사용한다."""
    size = config.bw_grid_size
    if size < 2:
        raise UsageError("bw_grid_size: the bandwidth-grid experiment needs at least a 2x2 grid")

    def _notify(event: str, data: dict):
        if progress_callback:
            progress_callback(event, data)

    model_id, n = config.models[0], config.n_list[0]
    if len(config.models) > 1 or len(config.n_list) > 1:
        logger.warning(f"bandwidth grid runs one scenario: using model {model_id} and n={n}, "
                       f"ignoring models {config.models[1:]} and n {config.n_list[1:]}")
    base = make_model(model_id)
    shape = _grid_shape(config, base.is_dirdir)
    alpha = primary_alpha(config)
    hs = np.geomspace(*config.bw_grid_h, size)
    gs = np.geomspace(*config.bw_grid_g, size)
    records, digests = [], {}

    for delta in config.delta_list:
        alternative = make_alternative(base, delta)
        samples = [alternative.sample(n, make_stream(config.master_seed, "bandwidthGrid", model_id, n, delta, m))
                   for m in range(config.M)]
        for i, h in enumerate(hs):
            for j, g in enumerate(gs):
                bw = _bandwidths(base.is_dirdir, (float(h), float(g)))

                def stream_for(m: int, i=i, j=j) -> np.random.Generator:
                    return make_stream(config.master_seed, "bandwidthGrid", model_id, n, delta, m, "cell", i, j)

                def task(m: int, rng: np.random.Generator, bw=bw) -> Tuple[float, str]:
                    sample = samples[m]
                    report = gof_bootstrap_test(sample, base, bw, kernel, B=config.B, rng=rng,
                                                grid_shape=shape, truncation=config.truncation)
                    return report.p_value, sample.digest()

                outcomes = run_keyed(task, config.M, stream_for, config.threads, f"cell ({i},{j}) replicate")
                # 반복이 실제로 검정한 표본의 digest (실패한 반복은 None)
                cell_digests = [o[1] if o is not None else None for o in outcomes]
                digests[(i, j, delta)] = cell_digests
                logger.debug(f"cell ({i},{j}) δ={delta:g} sample digests {cell_digests}")
                p_values = [o[0] for o in outcomes if o is not None]
                kept = len(p_values)
                rate = sum(p < alpha for p in p_values) / kept if kept else math.nan
                records.append({
                    "h": float(h), "g": float(g), "delta": delta, "alpha": alpha, "rate": rate,
                    "mc_se": ResultRow.monte_carlo_se(rate, kept) if kept else math.nan,
                    "M": kept, "B": config.B, "n_failed": config.M - kept,
                })
                logger.info(f"bandwidth grid {model_id} δ={delta:g} h={h:.4g} g={g:.4g}: rate={rate:.3f}")
                _notify("cell_done", {"h": float(h), "g": float(g), "delta": delta, "rate": rate})

    frame = pd.DataFrame(records, columns=BANDWIDTH_GRID_COLUMNS)
    if write:
        frame_to_csv(frame, _out_path(config, "bandwidth_grid.csv"), BANDWIDTH_GRID_COLUMNS)
        write_resolved_config(config, _out_path(config, "bandwidth_grid_config.txt"))
        for delta in config.delta_list:
            plot_rate_heatmap(frame[frame["delta"] == delta], _out_path(config, f"bandwidth_grid_delta{delta:g}.svg"),
                              title=f"{model_id}, n={n}, δ={delta:g}, α={alpha:g}", level=alpha)
    _notify("complete", {"cells": len(records)})
    return BandwidthGridResult(frame=frame, digests=digests)


# ── 중심극한정리 수렴 ──────────────────────────────────────────────────


@dataclass
class CltResult:
    statistic: str
    n: int
    bandwidths: Bandwidths
    values: np.ndarray              # 표준화 통계량 M개
    variance: float                 # 극한 분산 2σ²
    ks_statistic: float
    ks_p_value: float
    phi: Optional[float] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sd(self) -> float:
        return float(np.std(self.values, ddof=1))

    @property
    def mean_se(self) -> float:
        return self.sd / math.sqrt(self.values.size)

    @property
    def sd_se(self) -> float:
        """정규 근사 sd 표준오차 σ/√(2(M−1))"""
        return self.sd / math.sqrt(2.0 * (self.values.size - 1))

    def summary(self) -> str:
        lines = [
            f"statistic={self.statistic}",
            f"n={self.n}",
            f"bandwidths={self.bandwidths.label()}",
            f"M={self.values.size}",
            f"limit_variance={self.variance:.17g}",
            f"mean={self.mean:.17g}",
            f"mean_se={self.mean_se:.17g}",
            f"sd={self.sd:.17g}",
            f"sd_se={self.sd_se:.17g}",
            f"ks_statistic={self.ks_statistic:.17g}",
            f"ks_p_value={self.ks_p_value:.17g}",
        ]
        if self.phi is not None:
            lines.append(f"phi={self.phi:.17g}")
        return "\n".join(lines)


def clt_model() -> JointModel:
    """vM(0, 1) × N(0, 1) 독립 모형"""
    return custom_model(CircularDensity("vonMises", {"mu": 0.0, "kappa": 1.0}),
                        LinearDensity("normal", {"m": 0.0, "sigma": 1.0}))


def clt_bandwidths(n: int) -> Bandwidths:
    """h = g = 2 n^{-1/3}"""
    h = 2.0 * n ** (-1.0 / 3.0)
    return Bandwidths.dirlin(h, h)


def run_clt_experiment(config: ExperimentConfig, kernel: KernelPair = DEFAULT_KERNEL, write: bool = True,
                       progress_callback: Optional[Callable] = None) -> CltResult:
    """표준화 통계량 M개와 N(0, 2σ²)에 대한 KS 검정.

    independence: n(h g)^{1/2}(T_n − A_n), 극한 N(0, 2σ_I²)
    ise: n(h g)^{1/2}(I_n − ∫(LK f − f)² − λ(L²)λ^{-2}R(K)/(n h g)), 극한 N(0, 2σ²)
    """
    n = config.clt_n
    model = clt_model()
    bw = clt_bandwidths(n)
    q = 1
    grid = make_grid(SUPPORT_CIRCLE_LINE, config.clt_grid, config.clt_grid, center=0.0, scale=1.0,
                     truncation=config.truncation)
    R_fX, R_fZ = roughness(model.first), roughness(model.second)
    scale = n * math.sqrt(bw.h ** q * bw.g)

    if config.clt_statistic == "independence":
        const = asymptotic_constants(R_fX, R_fZ, n, bw, q, kernel)
        variance = 2.0 * const.sigma_I_sq

        def task(m: int, rng: np.random.Generator) -> float:
            return const.standardize(indep_statistic(model.sample(n, rng), bw, kernel, grid))
    else:
        f_true = grid.evaluate(model.pdf)
        smoothed = smoothed_model_on_grid(ModelOnGrid.of(model), bw, grid, kernel)
        bias_term = integrate_values(grid, (smoothed - f_true) ** 2)
        centering = bias_term + ise_centering(bw, n, q, kernel)
        variance = 2.0 * ise_sigma_sq(R_fX * R_fZ, q, kernel)

        def task(m: int, rng: np.random.Generator) -> float:
            kde = kde_on_grid(model.sample(n, rng), bw, grid, kernel)
            ise = integrate_values(grid, (kde.joint - f_true) ** 2)
            return scale * (ise - centering)

    values = run_keyed(task, config.M, lambda m: make_stream(config.master_seed, "cltConvergence",
                                                              config.clt_statistic, n, m),
                       config.threads, "CLT replicate", progress_callback)
    values = np.array([v for v in values if v is not None], dtype=float)
    if values.size < 2:
        raise UsageError("CLT experiment needs at least two successful replicates")
    ks = stats.kstest(values, "norm", args=(0.0, math.sqrt(variance)))
    phi = compute_phi(model, bw, kernel)
    result = CltResult(statistic=config.clt_statistic, n=n, bandwidths=bw, values=values, variance=variance,
                       ks_statistic=float(ks.statistic), ks_p_value=float(ks.pvalue), phi=phi)
    logger.info(f"CLT ({config.clt_statistic}) n={n}: mean={result.mean:.4g}±{result.mean_se:.2g}, "
                f"sd={result.sd:.4g} vs limit {math.sqrt(variance):.4g}, KS p={result.ks_p_value:.4g}")
    if write:
        stem = f"clt_{config.clt_statistic}"
        frame_to_csv(pd.DataFrame({"replicate": np.arange(values.size), "standardized": values}),
                     _out_path(config, f"{stem}.csv"))
        write_text(result.summary(), _out_path(config, f"{stem}_summary.txt"))
        write_resolved_config(config, _out_path(config, f"{stem}_config.txt"))
        plot_clt_histogram(values, variance, _out_path(config, f"{stem}.svg"),
                           title=f"{config.clt_statistic}, n={n}, KS p={result.ks_p_value:.3g}")
    return result


# ── 상수 점검 ──────────────────────────────────────────────────


@dataclass
class ConstantCheck:
    name: str
    value: float
    expected: float
    tolerance: float

    @property
    def abs_error(self) -> float:
        return abs(self.value - self.expected)

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.tolerance


def run_constants_check(kernel: KernelPair = DEFAULT_KERNEL) -> List[ConstantCheck]:
    """vM 커널과 정규 커널의 닫힌 형태 상수를 구적 값과 비교"""
    checks = []
    dir1, lin = sigma_sq_kernel_factor(kernel, 1)
    dir2, _ = sigma_sq_kernel_factor(kernel, 2)
    checks.append(ConstantCheck("directional factor q=1", dir1, (8.0 * math.pi) ** -0.5, 1e-6))
    checks.append(ConstantCheck("directional factor q=2", dir2, (8.0 * math.pi) ** -1.0, 1e-6))
    checks.append(ConstantCheck("linear factor", lin, (8.0 * math.pi) ** -0.5, 1e-8))

    factor = circle_factor(4096)
    vm = CircularDensity("vonMises", {"mu": 0.0, "kappa": 1.0})
    r_quad = factor.integrate(vm.pdf(factor.angles) ** 2)
    r_bessel = special.i0(2.0) / (2.0 * math.pi * special.i0(1.0) ** 2)
    checks.append(ConstantCheck("R(f_vM(kappa=1))", r_quad, float(r_bessel), 1e-8))

    for q in (1, 2):
        c = kernel_constants(kernel, q, 1.0)
        # L(r) = e^{-r}: λ_q(L) = 2^{q/2-1}ω_{q-1}Γ(q/2), λ_q(L²) = ω_{q-1}Γ(q/2)/2, b_q(L) = q/2
        expected = {1: (math.sqrt(2.0 * math.pi), math.sqrt(math.pi), 0.5),
                    2: (2.0 * math.pi, math.pi, 1.0)}[q]
        checks.append(ConstantCheck(f"lambda_{q}(L)", c.lambda_L, expected[0], 1e-8))
        checks.append(ConstantCheck(f"lambda_{q}(L^2)", c.lambda_L2, expected[1], 1e-8))
        checks.append(ConstantCheck(f"b_{q}(L)", c.b_q, expected[2], 1e-8))
    c = kernel_constants(kernel, 1, 1.0)
    checks.append(ConstantCheck("mu2(K)", c.mu2_K, 1.0, 1e-8))
    checks.append(ConstantCheck("R(K)", c.R_K, 1.0 / (2.0 * math.sqrt(math.pi)), 1e-8))

    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.warning(f"constant checks failed: {failed}")
    return checks


def constants_frame(checks: List[ConstantCheck]) -> pd.DataFrame:
    return pd.DataFrame([{"check": c.name, "value": c.value, "expected": c.expected,
                          "abs_error": c.abs_error, "tolerance": c.tolerance,
                          "passed": c.passed} for c in checks])


def format_constants_table(checks: List[ConstantCheck]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'value':>22}  {'abs_error':>10}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.value:>22.15g}  {c.abs_error:>10.2e}  "
                     f"{'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines)


# ── 데이터 분석 ──────────────────────────────────────────────────


@dataclass
class AnalysisResult:
    report: TestReport
    model: JointModel
    summary: str
    surface: Optional[pd.DataFrame] = None
    outputs: List[str] = field(default_factory=list)


def resolve_family(family: str) -> JointModel:
    """카탈로그 id 또는 사용자 지정 모형 문자열 ("vonMises:mu=0,kappa=1;normal:m=0,sigma=1")"""
    if ":" in family:
        return parse_custom(family)
    return make_model(family)


def _analysis_summary(path: str, sample, model: JointModel, report: TestReport) -> str:
    lines = [
        f"data: {path} ({sample.n} observations, {sample.support})",
        f"null family: {model.model_id} ({model.spec.description})",
    ]
    if report.fit is not None:
        fitted = ", ".join(f"{k}={v:.4g}" for k, v in report.fit.theta_hat.items())
        lines.append(f"fitted parameters: {fitted} (log-likelihood {report.fit.log_likelihood:.4f}, "
                     f"{report.fit.method}{'' if report.fit.converged else ', not converged'})")
    lines += [
        f"bandwidths: {report.bandwidths.label()} ({report.bandwidth_rule})",
        f"R_n = {report.statistic:.6g}",
        f"bootstrap p-value = {report.p_value:.4f} (B={report.B})",
    ]
    if report.flagged:
        lines.append(f"WARNING: {report.n_failed} bootstrap refits failed; p-value flagged")
    return "\n".join(lines)


def analyze_dataset(path: str, model_family: str, config: ExperimentConfig,
                    kernel: KernelPair = DEFAULT_KERNEL, degrees: bool = False,
                    write: bool = True, progress_callback: Optional[Callable] = None) -> AnalysisResult:
    """CSV 자료에 대한 적합 + 부트스트랩 적합도 검정 (+ 선택적 p-값 곡면)"""
    model = resolve_family(model_family)
    sample = read_sample(path, model.support, degrees)
    shape = _grid_shape(config, model.is_dirdir)
    bw = _bandwidths(model.is_dirdir, config.bandwidths) if config.bandwidth_rule == "fixed" else None
    rng = make_stream(config.master_seed, "analyze", model.model_id)
    report = gof_bootstrap_test(sample, model, bw, kernel, B=config.B, rng=rng, seed=config.master_seed,
                                grid_shape=shape, truncation=config.truncation, threads=config.threads,
                                progress_callback=progress_callback)
    summary = _analysis_summary(path, sample, model, report)
    result = AnalysisResult(report=report, model=model, summary=summary)

    if config.bw_grid_size > 0:
        factors = np.geomspace(1.0 / 3.0, 3.0, config.bw_grid_size)
        records = []
        for i, fh in enumerate(factors):
            for j, fg in enumerate(factors):
                cell_bw = _bandwidths(model.is_dirdir, (report.bandwidths.h * fh, report.bandwidths.second * fg))
                try:
                    cell = gof_bootstrap_test(sample, model, cell_bw, kernel, B=config.B,
                                              rng=make_stream(config.master_seed, "analyze", model.model_id,
                                                              "surface", i, j),
                                              grid_shape=shape, truncation=config.truncation,
                                              threads=config.threads)
                    p_value = cell.p_value
                except DirLinError as e:
                    logger.warning(f"p-value surface cell ({i},{j}) failed: {e}")
                    p_value = float("nan")
                records.append({"h": cell_bw.h, "g": cell_bw.second, "p_value": p_value})
        result.surface = pd.DataFrame(records, columns=["h", "g", "p_value"])

    if write:
        stem = os.path.splitext(os.path.basename(path))[0]
        outputs = [
            write_report(report, _out_path(config, f"{stem}_report.txt")),
            write_text(summary, _out_path(config, f"{stem}_summary.txt")),
        ]
        fitted = model.with_params(report.fit.theta_hat) if report.fit is not None else model
        outputs.append(plot_model_contour(fitted, statistic_grid(sample, *shape, config.truncation),
                                          _out_path(config, f"{stem}_fit.svg"), sample))
        if result.surface is not None:
            outputs.append(frame_to_csv(result.surface, _out_path(config, f"{stem}_pvalue_surface.csv")))
            outputs.append(plot_rate_heatmap(result.surface, _out_path(config, f"{stem}_pvalue_surface.svg"),
                                             value="p_value", title=f"{model.model_id} p-value surface",
                                             level=primary_alpha(config)))
        result.outputs = outputs
    logger.info(f"analysis of {path}: p={report.p_value:.4f}")
    return result
