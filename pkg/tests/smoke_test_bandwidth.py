"""LCV 대역폭 선택 smoke test"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from models.errors import DataError
from models.sample import DirLinSample
from services.bandwidth import (
    default_search_box,
    lcv_bandwidths,
    lcv_grid_scan,
    median_lcv_bandwidths,
)
from services.kde import loo_log_likelihood
from services.model_catalog import make_model
from services.rng_streams import make_stream

# ── 테스트 데이터 ──
SAMPLE = make_model("CL1").sample(40, make_stream(11, "lcv"))


def test_default_search_box():
    (h_lo, h_hi), (g_lo, g_hi) = default_search_box(SAMPLE)
    sd = float(np.std(SAMPLE.z, ddof=1))
    assert (h_lo, h_hi) == (0.02, 3.0)
    assert abs(g_lo - 0.02 * sd) < 1e-15 and abs(g_hi - 3.0 * sd) < 1e-15
    torus = make_model("CC2").sample(10, make_stream(1, "box"))
    assert default_search_box(torus) == ((0.02, 3.0), (0.02, 3.0))
    print("  [PASS] default search box")


def test_lcv_improves_on_grid():
    scan = lcv_grid_scan(SAMPLE, size=6)
    assert scan.objective.shape == (6, 6)
    i, j = scan.argmax()
    assert scan.objective[i, j] == scan.best
    bw = lcv_bandwidths(SAMPLE, size=6)
    assert not bw.is_dirdir
    assert loo_log_likelihood(SAMPLE, bw) >= scan.best - 1e-9
    print("  [PASS] LCV ≥ grid optimum")


def test_boundary_hit():
    box = ((2.0, 3.0), (0.5, 1.0))
    bw = lcv_bandwidths(SAMPLE, search_box=box, size=4)
    assert bw.boundary_hit
    assert bw.h == 2.0
    print("  [PASS] boundary hit flagged")


def test_lcv_errors_and_torus():
    with pytest.raises(DataError):
        lcv_bandwidths(SAMPLE.take([0, 1]))
    torus = make_model("CC4").sample(30, make_stream(11, "lcv-torus"))
    bw = lcv_bandwidths(torus, size=5)
    assert bw.is_dirdir and 0.02 <= bw.h <= 3.0 and 0.02 <= bw.second <= 3.0
    print("  [PASS] LCV errors and torus")


def test_median_lcv():
    bw = median_lcv_bandwidths(make_model("CL1"), 30, 3, make_stream(11, "median"))
    assert not bw.is_dirdir
    assert 0.02 <= bw.h <= 3.0
    again = median_lcv_bandwidths(make_model("CL1"), 30, 3, make_stream(11, "median"))
    assert bw.as_tuple() == again.as_tuple()
    print("  [PASS] median LCV")


def test_duplicate_sample_still_selects():
    """중복 관측이 있어도 선택은 유한한 값을 준다"""
    dup = DirLinSample(np.vstack([SAMPLE.x, SAMPLE.x[:5]]), np.concatenate([SAMPLE.z, SAMPLE.z[:5]]))
    bw = lcv_bandwidths(dup, size=5)
    assert np.isfinite(loo_log_likelihood(dup, bw))
    print("  [PASS] duplicated observations")
