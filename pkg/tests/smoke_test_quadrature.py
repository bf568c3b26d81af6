"""적분 격자 smoke test"""

import math
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from models.errors import DataError, NumericError, UsageError
from models.sample import (
    SUPPORT_CIRCLE_CIRCLE,
    SUPPORT_CIRCLE_LINE,
    SUPPORT_SPHERE_LINE,
    DirDirSample,
    DirLinSample,
)
from services.circular_densities import CircularDensity, LinearDensity
from services.quadrature import (
    circle_factor,
    grid_for_sample,
    integrate,
    integrate_values,
    line_factor,
    line_mass,
    make_grid,
    sphere_factor,
)
from services.special_math import log_vmf_constant


def test_factor_weights():
    """원: 2π, 구면: 4π"""
    assert abs(circle_factor(64).weights.sum() - 2 * math.pi) < 1e-12
    assert abs(sphere_factor(16, 32).weights.sum() - 4 * math.pi) < 1e-12
    line = line_factor(20, center=1.0, scale=2.0, truncation=3.0)
    assert abs(line.weights.sum() - 12.0) < 1e-12
    assert line.lower == -5.0 and line.upper == 7.0
    angles = circle_factor(8).angles
    assert np.all((angles >= 0) & (angles < 2 * math.pi))
    print("  [PASS] factor weights")


def test_line_mass_and_bad_scale():
    assert abs(line_mass(0.0, 1.0, 7.0) - 1.0) < 1e-10
    with pytest.raises(UsageError):
        line_factor(10, 0.0, 0.0)
    print("  [PASS] line_mass")


def test_integrate_von_mises_times_normal():
    vm = CircularDensity("vonMises", {"mu": 1.0, "kappa": 2.0})
    nd = LinearDensity("normal", {"m": 0.5, "sigma": 1.3})
    grid = make_grid(SUPPORT_CIRCLE_LINE, 128, 96, center=0.5, scale=1.3, truncation=8.0)

    def f(x, z):
        theta = np.arctan2(x[:, 1], x[:, 0])
        return vm.pdf(theta) * nd.pdf(z)

    assert abs(integrate(grid, f) - 1.0) < 1e-10
    values = grid.evaluate(f)
    assert values.shape == grid.shape == (128, 96)
    assert abs(integrate_values(grid, values) - 1.0) < 1e-10
    # 격자 세분 후에도 같은 값
    assert abs(integrate(grid.refined(2), f) - 1.0) < 1e-10
    print("  [PASS] ∫ vM × N = 1")


def test_integrate_sphere_and_torus():
    kappa = 4.0
    mean = np.array([0.0, 0.0, 1.0])
    const = math.exp(log_vmf_constant(2, kappa))
    grid = make_grid(SUPPORT_SPHERE_LINE, 48, 64, truncation=8.0)

    def f(x, z):
        return const * np.exp(kappa * (x @ mean)) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    assert abs(integrate(grid, f) - 1.0) < 1e-8

    torus = make_grid(SUPPORT_CIRCLE_CIRCLE, 64, 64)
    uniform = lambda x, y: np.full(x.shape[0], 1.0 / (4 * math.pi ** 2))
    assert abs(integrate(torus, uniform) - 1.0) < 1e-12
    print("  [PASS] sphere × line and torus")


def test_non_finite_node_is_reported():
    grid = make_grid(SUPPORT_CIRCLE_LINE, 16, 8)

    def bad(x, z):
        out = np.ones(x.shape[0])
        out[5] = np.nan
        return out

    with pytest.raises(NumericError, match="node 5"):
        integrate(grid, bad)
    with pytest.raises(NumericError):
        integrate_values(grid, np.ones((3, 3)))
    print("  [PASS] non-finite integrand")


def test_grid_for_sample():
    rng = np.random.default_rng(1)
    sample = DirLinSample.from_angles(rng.uniform(0, 2 * np.pi, 50), rng.normal(3.0, 2.0, 50))
    grid = grid_for_sample(sample, 32, 24, truncation=5.0)
    sd = float(np.std(sample.z))
    assert abs(grid.second.lower - (np.mean(sample.z) - 5.0 * sd)) < 1e-12
    assert grid.shape == (32, 24)
    assert "CircleLine 32x24" in grid.describe()

    torus_sample = DirDirSample.from_angles(rng.uniform(0, 6, 10), rng.uniform(0, 6, 10))
    with pytest.raises(DataError, match="grid/support mismatch"):
        grid.check_sample(torus_sample)
    assert grid_for_sample(torus_sample, 16, 16).support == SUPPORT_CIRCLE_CIRCLE
    print("  [PASS] grid_for_sample")
