"""적합도 검정 R_n smoke test"""

import math
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy import stats

from models.errors import DataError, UsageError
from models.sample import Bandwidths, DirLinSample
from services.asymptotics import ise_centering
from services.gof_test import ModelOnGrid, gof_bootstrap_test, gof_statistic, smoothed_model_on_grid
from services.independence_test import statistic_grid
from services.kde import kde_on_grid
from services.joint_fitting import fit_joint, fitted_model
from services.model_catalog import deviation_model, make_model
from services.quadrature import integrate_values
from services.rng_streams import make_stream

# ── 테스트 데이터 ──
CL1 = make_model("CL1")
SAMPLE = CL1.sample(50, make_stream(17, "gof"))
BW = Bandwidths.dirlin(0.5, 0.5)
SHAPE = (32, 24)


def test_statistic_is_zero_against_itself():
    grid = statistic_grid(SAMPLE, *SHAPE)
    kde = kde_on_grid(SAMPLE, BW, grid)
    assert gof_statistic(SAMPLE, kde.joint, BW, grid=grid) == 0.0
    with pytest.raises(DataError):
        gof_statistic(SAMPLE, np.zeros((3, 3)), BW, grid=grid)
    print("  [PASS] R_n = 0 for f̂ itself")


def test_smoothed_model_is_a_density():
    grid = statistic_grid(SAMPLE, 128, 96)
    inner = ModelOnGrid.of(CL1)
    smoothed = smoothed_model_on_grid(inner, BW, grid)
    assert smoothed.shape == grid.shape
    assert np.all(smoothed >= 0)
    # 통계량 격자가 분포 대부분을 덮는다
    assert abs(integrate_values(grid, smoothed) - 1.0) < 1e-3
    print("  [PASS] LK f_θ on the statistic grid")


def test_composite_bootstrap():
    report = gof_bootstrap_test(SAMPLE, "CL1", BW, B=5, seed=3, grid_shape=SHAPE)
    assert report.statistic_name == "R_n" and report.method == "bootstrap"
    assert report.model_id == "CL1" and report.fit is not None
    assert report.B + report.n_failed == 5
    assert report.extras["simple_null"] == 0.0
    assert abs(report.p_value * report.B - round(report.p_value * report.B)) < 1e-12

    again = gof_bootstrap_test(SAMPLE, "CL1", BW, B=5, seed=3, grid_shape=SHAPE, threads=2)
    assert again.replicates == report.replicates
    print("  [PASS] composite bootstrap")


def test_simple_null_rejects_deviation():
    far = deviation_model("D1").sample(50, make_stream(17, "far"))
    report = gof_bootstrap_test(far, CL1, BW, B=10, seed=3, simple_theta0=CL1.params, grid_shape=SHAPE)
    assert report.fit is None and report.extras["simple_null"] == 1.0
    assert report.p_value <= 0.1
    print("  [PASS] simple null")


def test_gof_errors():
    torus = make_model("CC1").sample(20, make_stream(1, "t"))
    with pytest.raises(DataError, match="support mismatch"):
        gof_bootstrap_test(torus, "CL1", BW, B=2)
    with pytest.raises(UsageError):
        gof_bootstrap_test(SAMPLE, "CL1", BW, B=0)
    print("  [PASS] goodness-of-fit errors")


def test_p_value_extremes(monkeypatch):
    """모든 R*가 R_n보다 작으면 p = 0, 동률은 기각하지 않는 쪽으로 센다"""
    first = gof_bootstrap_test(SAMPLE, "CL1", BW, B=2, grid_shape=SHAPE)
    # seed 없이 호출하면 실제로 쓴 seed 0을 기록한다
    assert first.seed == 0
    R_n = first.statistic
    assert R_n > 0
    below = [0.0, 0.5 * R_n, R_n * (1 - 1e-9)]
    monkeypatch.setattr("services.gof_test.run_replicates", lambda *args, **kwargs: list(below))
    report = gof_bootstrap_test(SAMPLE, "CL1", BW, B=3, grid_shape=SHAPE)
    assert report.statistic == R_n and report.B == 3
    assert report.p_value == 0.0

    below[0] = R_n
    assert gof_bootstrap_test(SAMPLE, "CL1", BW, B=3, grid_shape=SHAPE).p_value == 1 / 3
    print("  [PASS] bootstrap p-value extremes")


def test_two_point_quadrature_oracle():
    """n=2, 8×8 격자: R_n = Σ_ij w_ij (f̂_ij − s_ij)² 를 커널 합으로 직접 계산"""
    sample = DirLinSample.from_angles([0.0, math.pi], [-1.0, 1.0])
    bw = Bandwidths.dirlin(0.5, 0.5)
    grid = statistic_grid(sample, 8, 8)
    angles, z = grid.first.angles, grid.second.points
    kde = np.zeros(grid.shape)
    for theta_i, z_i in zip(sample.theta, sample.z):
        kde += np.outer(stats.vonmises.pdf(angles, 1 / 0.25, loc=theta_i), stats.norm.pdf(z, z_i, 0.5)) / 2
    for level in (0.0, 0.01):
        smoothed = np.full(grid.shape, level)
        expected = sum(grid.first.weights[i] * grid.second.weights[j] * (kde[i, j] - level) ** 2
                       for i in range(8) for j in range(8))
        assert abs(gof_statistic(sample, smoothed, bw, grid=grid) - expected) < 1e-12 * max(expected, 1.0)
    print("  [PASS] two-point quadrature oracle")


def _fitted_statistic(sample, bw, grid) -> float:
    null = fitted_model(CL1, fit_joint(CL1, sample))
    return gof_statistic(sample, smoothed_model_on_grid(null, bw, grid), bw, grid=grid)


def test_centering_matches_integrated_variance():
    """적합 모형에 대한 E R_n ≈ λ(L²)λ(L)⁻² R(K) / (n h g), 고정 h = g = 0.2"""
    bw = Bandwidths.dirlin(0.2, 0.2)
    n = 500
    centering = ise_centering(bw, n)
    assert abs(centering - 1 / (4 * math.pi * n * 0.2 * 0.2)) < 0.02 * centering
    values = []
    for m in range(60):
        sample = CL1.sample(n, make_stream(19, "centering", m))
        values.append(_fitted_statistic(sample, bw, statistic_grid(sample, 128, 256, truncation=6.0)))
    ratio = float(np.mean(values)) / centering
    assert 0.5 <= ratio <= 1.5, ratio
    print(f"  [PASS] R_n centering (ratio {ratio:.3f})")


def test_estimated_parameters_vanish_asymptotically():
    """참 모형과 적합 모형의 R_n 차이: n=250 → 1000에서 중앙값이 2배 이상 줄어든다"""
    truth = ModelOnGrid.of(CL1)
    medians = []
    for n in (250, 1000):
        gaps = []
        for m in range(100):
            sample = CL1.sample(n, make_stream(23, "truth-vs-fit", n, m))
            grid = statistic_grid(sample, 64, 96)
            with_truth = gof_statistic(sample, smoothed_model_on_grid(truth, BW, grid), BW, grid=grid)
            gaps.append(abs(with_truth - _fitted_statistic(sample, BW, grid)))
        medians.append(float(np.median(gaps)))
    assert medians[0] >= 2 * medians[1], medians
    print(f"  [PASS] truth vs fitted R_n gap {medians}")


@pytest.mark.skipif(os.environ.get("DIRLINLAB_ACCEPTANCE") != "1",
                    reason="set DIRLINLAB_ACCEPTANCE=1 to run the desk-scale acceptance runs")
def test_simple_and_composite_size_agree():
    """δ=0, n=100, M=200, B=100: 단순 귀무가설과 부트스트랩 기각률이 같은 이항 구간 안"""
    threads = os.cpu_count() or 4
    rejections = {"simple": 0, "composite": 0}
    for m in range(200):
        sample = CL1.sample(100, make_stream(29, "simple-vs-composite", m))
        simple = gof_bootstrap_test(sample, CL1, BW, B=100, seed=m, simple_theta0=CL1.params,
                                    grid_shape=(64, 48), threads=threads)
        composite = gof_bootstrap_test(sample, CL1, BW, B=100, seed=m, grid_shape=(64, 48), threads=threads)
        rejections["simple"] += simple.p_value < 0.05
        rejections["composite"] += composite.p_value < 0.05
    rates = {k: v / 200 for k, v in rejections.items()}
    # 0.05 주변 99% 이항 구간
    for name, rate in rates.items():
        assert 0.01 <= rate <= 0.09, (name, rates)
    print(f"  [PASS] simple vs composite size {rates}")
