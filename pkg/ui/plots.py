"""정적 SVG 그림 (matplotlib Agg)."""

import logging
import os
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from scipy import stats  # noqa: E402

from models.errors import UsageError  # noqa: E402
from services.quadrature import QuadratureGrid  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"wrote {path}")
    return path


def _axes_values(grid: QuadratureGrid):
    if grid.first.kind != "circle":
        raise UsageError(f"contour plots need a circular first factor, got {grid.first.kind}")
    second = grid.second.angles if grid.second.is_directional else grid.second.points
    return grid.first.angles, second


def _second_label(grid: QuadratureGrid) -> str:
    return "ψ" if grid.second.is_directional else "z"


def plot_density_contour(values: np.ndarray, grid: QuadratureGrid, path: str, sample=None,
                         title: str = "") -> str:
    """격자 위 밀도 (k1, k2)의 등고선. sample이 있으면 산점도를 겹친다."""
    theta, second = _axes_values(grid)
    fig, ax = plt.subplots(figsize=(7, 5))
    cs = ax.contourf(theta, second, np.asarray(values).T, levels=20, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="density")
    if sample is not None:
        ax.scatter(sample.theta, sample.second if not grid.second.is_directional else sample.psi,
                   s=6, c="white", edgecolors="black", linewidths=0.3, alpha=0.8)
    ax.set_xlabel("θ")
    ax.set_ylabel(_second_label(grid))
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_title(title)
    return _save(fig, path)


def plot_model_contour(model, grid: QuadratureGrid, path: str, sample=None, title: str = "") -> str:
    """적합 모형 밀도 등고선 + 데이터 산점도"""
    values = grid.evaluate(model.pdf)
    return plot_density_contour(values, grid, path, sample, title or f"{model.model_id} fit")


def plot_rate_heatmap(frame: pd.DataFrame, path: str, value: str = "rate", title: str = "",
                      level: Optional[float] = None) -> str:
    """(h, g) 격자 위 기각률 또는 p-값 히트맵"""
    table = frame.pivot_table(index="g", columns="h", values=value)
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(table.columns.to_numpy(), table.index.to_numpy(), table.to_numpy(),
                         cmap="magma", shading="nearest", vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, label=value)
    if level is not None:
        ax.contour(table.columns.to_numpy(), table.index.to_numpy(), table.to_numpy(),
                   levels=[level], colors="cyan", linewidths=1.0)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("h")
    ax.set_ylabel("g")
    ax.set_title(title)
    return _save(fig, path)


def plot_clt_histogram(values: np.ndarray, variance: float, path: str, title: str = "") -> str:
    """표준화 통계량 히스토그램과 N(0, variance) 밀도"""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=30, density=True, color="#0033A0", alpha=0.6, label="Monte Carlo")
    lo, hi = min(values.min(), -4 * np.sqrt(variance)), max(values.max(), 4 * np.sqrt(variance))
    t = np.linspace(lo, hi, 400)
    ax.plot(t, stats.norm.pdf(t, scale=np.sqrt(variance)), "r--", linewidth=1.5, label="limit")
    ax.legend(fontsize=8)
    ax.set_title(title)
    return _save(fig, path)
