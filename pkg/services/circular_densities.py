"""원형·선형 주변 밀도.

CircularDensity: vonMises, cardioid, wrappedCauchy, wrappedNormal, vmMixture, uniform
LinearDensity:   normal, lognormal, gamma, normalMixture

원형 cdf는 cardioid/uniform은 닫힌 형태, 나머지는 4096 노드 누적 사다리꼴 표를
생성 시점에 만들어 둔다 (생성 후 불변). 역함수는 60회 이분법.
von Mises 표본은 Wood(1994) 기각 알고리즘으로 뽑는다.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from models.errors import UsageError
from services.special_math import TWO_PI, log_bessel_i

logger = logging.getLogger(__name__)

CDF_TABLE_NODES = 4096
BISECTION_ITERATIONS = 60

CIRCULAR_FAMILIES: Dict[str, Tuple[str, ...]] = {
    "vonMises": ("mu", "kappa"),
    "cardioid": ("mu", "rho"),
    "wrappedCauchy": ("mu", "rho"),
    "wrappedNormal": ("mu", "sigma"),
    "vmMixture": ("p1", "mu1", "kappa1", "mu2", "kappa2"),
    "uniform": (),
}

LINEAR_FAMILIES: Dict[str, Tuple[str, ...]] = {
    "normal": ("m", "sigma"),
    "lognormal": ("m", "sigma"),
    "gamma": ("a", "p"),           # a: rate, p: shape
    "normalMixture": ("p1", "m1", "sigma1", "m2", "sigma2"),
}


def wrap_angle(theta):
    """[0, 2π)로 정규화"""
    return np.mod(theta, TWO_PI)


def circular_mean(theta, weights=None) -> Tuple[float, float]:
    """(평균 방향, 평균 합성벡터 길이)"""
    theta = np.asarray(theta, dtype=float)
    w = np.ones_like(theta) if weights is None else np.asarray(weights, dtype=float)
    total = np.sum(w)
    C = np.sum(w * np.cos(theta)) / total
    S = np.sum(w * np.sin(theta)) / total
    return float(np.mod(np.arctan2(S, C), TWO_PI)), float(math.hypot(C, S))


def invert_cdf(cdf: Callable, u, lower: float, upper: float,
               iterations: int = BISECTION_ITERATIONS) -> np.ndarray:
    """단조 cdf의 벡터화 이분법 역함수"""
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, float(lower))
    hi = np.full(u.shape, float(upper))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# ── von Mises(-Fisher) Wood 표본추출 ──────────────────────────────────────────────────


def sample_vmf(mean_direction: np.ndarray, kappa: float, n: int,
               rng: np.random.Generator) -> np.ndarray:
    """S^{m-1} 위의 vMF(μ, κ) 표본 (n, m). Wood(1994) 기각 알고리즘."""
    mu = np.asarray(mean_direction, dtype=float)
    mu = mu / np.linalg.norm(mu)
    m = mu.shape[0]
    if kappa < 1e-12:
        x = rng.standard_normal((n, m))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    # b = (-2κ + √(4κ² + (m-1)²))/(m-1) 의 안정형
    b = (m - 1.0) / (2.0 * kappa + math.sqrt(4.0 * kappa ** 2 + (m - 1.0) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (m - 1.0) * math.log(1.0 - x0 * x0)
    w = np.empty(0)
    while w.size < n:
        k = max(2 * (n - w.size), 16)
        Z = rng.beta((m - 1.0) / 2.0, (m - 1.0) / 2.0, size=k)
        W = (1.0 - (1.0 + b) * Z) / (1.0 - (1.0 - b) * Z)
        U = rng.uniform(size=k)
        accept = kappa * W + (m - 1.0) * np.log(1.0 - x0 * W) - c >= np.log(U)
        w = np.concatenate([w, W[accept]])
    w = w[:n]
    # 접공간 방향: S^{m-2} 위의 균등 벡터
    v = rng.standard_normal((n, m - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = np.concatenate([np.sqrt(np.maximum(1.0 - w * w, 0.0))[:, None] * v, w[:, None]], axis=1)
    # e_m → μ 하우스홀더 반사
    e = np.zeros(m)
    e[-1] = 1.0
    u = e - mu
    norm_u = np.linalg.norm(u)
    if norm_u < 1e-15:
        return x
    u /= norm_u
    return x - 2.0 * np.outer(x @ u, u)


def _vm_pdf(theta, mu: float, kappa: float):
    return np.exp(kappa * (np.cos(theta - mu) - 1.0) - math.log(TWO_PI) - (float(log_bessel_i(0.0, kappa)) - kappa))


def sample_von_mises(mu, kappa, rng: np.random.Generator) -> np.ndarray:
    """원 위 vM(μ_i, κ_i) 한 개씩 (μ, κ는 같은 모양의 배열). Wood 알고리즘의 m = 2 경우."""
    mu, kappa = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(kappa, dtype=float))
    mu, kappa = mu.ravel(), kappa.ravel()
    if np.any(kappa < 0):
        raise UsageError("von Mises concentration must be >= 0")
    b = 1.0 / (2.0 * kappa + np.sqrt(4.0 * kappa ** 2 + 1.0))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + np.log(1.0 - x0 * x0)
    w = np.empty(mu.size)
    pending = np.arange(mu.size)
    while pending.size:
        k = pending.size
        bp = b[pending]
        Z = rng.beta(0.5, 0.5, size=k)
        W = (1.0 - (1.0 + bp) * Z) / (1.0 - (1.0 - bp) * Z)
        U = rng.uniform(size=k)
        ok = kappa[pending] * W + np.log(1.0 - x0[pending] * W) - c[pending] >= np.log(U)
        w[pending[ok]] = W[ok]
        pending = pending[~ok]
    sign = np.where(rng.uniform(size=mu.size) < 0.5, -1.0, 1.0)
    return wrap_angle(mu + sign * np.arccos(np.clip(w, -1.0, 1.0)))


def _vm_sample(mu: float, kappa: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_von_mises(np.full(n, mu), np.full(n, kappa), rng)


def circular_pdf(family: str, p: Dict[str, float], theta):
    """표 없이 밀도만 계산 (적합 루프용)"""
    theta = np.asarray(theta, dtype=float)
    if family == "vonMises":
        return _vm_pdf(theta, p["mu"], p["kappa"])
    if family == "cardioid":
        return (1.0 + 2.0 * p["rho"] * np.cos(theta - p["mu"])) / TWO_PI
    if family == "wrappedCauchy":
        rho = p["rho"]
        return (1.0 - rho ** 2) / (TWO_PI * (1.0 + rho ** 2 - 2.0 * rho * np.cos(theta - p["mu"])))
    if family == "wrappedNormal":
        sigma = p["sigma"]
        P = wrapped_normal_terms(sigma)
        d = np.mod(theta - p["mu"] + np.pi, TWO_PI) - np.pi
        shifts = TWO_PI * np.arange(-P, P + 1)
        return np.sum(stats.norm.pdf(d[..., None] + shifts, scale=sigma), axis=-1)
    if family == "vmMixture":
        return (p["p1"] * _vm_pdf(theta, p["mu1"], p["kappa1"])
                + (1.0 - p["p1"]) * _vm_pdf(theta, p["mu2"], p["kappa2"]))
    if family == "uniform":
        return np.full(theta.shape, 1.0 / TWO_PI)
    raise UsageError(f"unknown circular family {family!r}")


# ── 원형 밀도 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class CircularDensity:
    """[0, 2π) 위의 원형 밀도"""
    family: str
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in CIRCULAR_FAMILIES:
            raise UsageError(f"unknown circular family {self.family!r}")
        names = CIRCULAR_FAMILIES[self.family]
        missing = [k for k in names if k not in self.params]
        if missing:
            raise UsageError(f"{self.family}: missing parameters {missing}")
        params = {k: float(self.params[k]) for k in names}
        object.__setattr__(self, "params", params)
        self._validate()
        table = self._build_table() if self.family in _TABULATED else None
        object.__setattr__(self, "_table", table)

    def _validate(self) -> None:
        p = self.params
        if self.family == "vonMises" and p["kappa"] < 0:
            raise UsageError(f"vonMises: kappa must be >= 0, got {p['kappa']}")
        if self.family == "cardioid" and abs(p["rho"]) > 0.5:
            raise UsageError(f"cardioid: |rho| must be <= 1/2, got {p['rho']}")
        if self.family == "wrappedCauchy" and not (0.0 <= p["rho"] < 1.0):
            raise UsageError(f"wrappedCauchy: rho must lie in [0, 1), got {p['rho']}")
        if self.family == "wrappedNormal" and not p["sigma"] > 0:
            raise UsageError(f"wrappedNormal: sigma must be positive, got {p['sigma']}")
        if self.family == "vmMixture":
            if not (0.0 <= p["p1"] <= 1.0):
                raise UsageError(f"vmMixture: p1 must lie in [0, 1], got {p['p1']}")
            if p["kappa1"] < 0 or p["kappa2"] < 0:
                raise UsageError("vmMixture: concentrations must be >= 0")

    # -----------------------------------------------------------
    # 밀도
    # -----------------------------------------------------------

    def pdf(self, theta):
        return circular_pdf(self.family, self.params, theta)

    def logpdf(self, theta):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(theta))

    # -----------------------------------------------------------
    # 누적분포와 역함수
    # -----------------------------------------------------------

    def _build_table(self) -> Tuple[np.ndarray, np.ndarray]:
        nodes = np.linspace(0.0, TWO_PI, CDF_TABLE_NODES + 1)
        F = cumulative_trapezoid(self.pdf(nodes), nodes, initial=0.0)
        F = np.maximum.accumulate(F / F[-1])
        F[-1] = 1.0
        nodes.setflags(write=False)
        F.setflags(write=False)
        return nodes, F

    def cdf(self, theta):
        """F(θ) = ∫_0^θ f. 범위 밖 θ는 mod 2π로 정규화."""
        theta = np.asarray(theta, dtype=float)
        t = np.where((theta >= 0.0) & (theta <= TWO_PI), theta, np.mod(theta, TWO_PI))
        p = self.params
        if self.family == "uniform":
            return t / TWO_PI
        if self.family == "cardioid":
            mu, rho = p["mu"], p["rho"]
            return (t + 2.0 * rho * (np.sin(t - mu) + np.sin(mu))) / TWO_PI
        nodes, F = self._table
        return np.interp(t, nodes, F)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "uniform":
            return TWO_PI * u
        return invert_cdf(self.cdf, u, 0.0, TWO_PI)

    # -----------------------------------------------------------
    # 표본추출
    # -----------------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.family == "vonMises":
            return _vm_sample(p["mu"], p["kappa"], n, rng)
        if self.family == "wrappedCauchy":
            if p["rho"] == 0.0:
                return rng.uniform(0.0, TWO_PI, size=n)
            gamma = -math.log(p["rho"])
            return wrap_angle(p["mu"] + gamma * np.tan(np.pi * (rng.uniform(size=n) - 0.5)))
        if self.family == "wrappedNormal":
            return wrap_angle(p["mu"] + p["sigma"] * rng.standard_normal(n))
        if self.family == "vmMixture":
            first = rng.uniform(size=n) < p["p1"]
            a = _vm_sample(p["mu1"], p["kappa1"], n, rng)
            b = _vm_sample(p["mu2"], p["kappa2"], n, rng)
            return np.where(first, a, b)
        if self.family == "uniform":
            return rng.uniform(0.0, TWO_PI, size=n)
        # cardioid: 역변환
        return self.ppf(rng.uniform(size=n))

    def to_json_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}


_TABULATED = {"vonMises", "wrappedCauchy", "wrappedNormal", "vmMixture"}


def wrapped_normal_terms(sigma: float) -> int:
    """감김 급수 항 수 P = ceil(6σ/2π) + 1 (각 방향)"""
    return int(math.ceil(6.0 * sigma / TWO_PI)) + 1


# ── 선형 밀도 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class LinearDensity:
    """실수선 위의 선형 밀도"""
    family: str
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in LINEAR_FAMILIES:
            raise UsageError(f"unknown linear family {self.family!r}")
        names = LINEAR_FAMILIES[self.family]
        missing = [k for k in names if k not in self.params]
        if missing:
            raise UsageError(f"{self.family}: missing parameters {missing}")
        params = {k: float(self.params[k]) for k in names}
        object.__setattr__(self, "params", params)
        for key in ("sigma", "sigma1", "sigma2", "a", "p"):
            if key in params and not params[key] > 0:
                raise UsageError(f"{self.family}: {key} must be positive, got {params[key]}")
        if self.family == "normalMixture" and not (0.0 <= params["p1"] <= 1.0):
            raise UsageError(f"normalMixture: p1 must lie in [0, 1], got {params['p1']}")

    def _frozen(self):
        p = self.params
        if self.family == "normal":
            return stats.norm(loc=p["m"], scale=p["sigma"])
        if self.family == "lognormal":
            return stats.lognorm(s=p["sigma"], scale=math.exp(p["m"]))
        if self.family == "gamma":
            return stats.gamma(a=p["p"], scale=1.0 / p["a"])
        return None

    def _components(self):
        p = self.params
        return (p["p1"], stats.norm(loc=p["m1"], scale=p["sigma1"]),
                stats.norm(loc=p["m2"], scale=p["sigma2"]))

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        dist = self._frozen()
        if dist is not None:
            return dist.pdf(z)
        w, d1, d2 = self._components()
        return w * d1.pdf(z) + (1.0 - w) * d2.pdf(z)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        dist = self._frozen()
        if dist is not None:
            return dist.logpdf(z)
        w, d1, d2 = self._components()
        return np.logaddexp(math.log(w) + d1.logpdf(z) if w > 0 else -np.inf,
                            math.log1p(-w) + d2.logpdf(z) if w < 1 else -np.inf)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        dist = self._frozen()
        if dist is not None:
            return dist.cdf(z)
        w, d1, d2 = self._components()
        return w * d1.cdf(z) + (1.0 - w) * d2.cdf(z)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        dist = self._frozen()
        if dist is not None:
            return dist.ppf(u)
        lo = min(self.params["m1"] - 40 * self.params["sigma1"], self.params["m2"] - 40 * self.params["sigma2"])
        hi = max(self.params["m1"] + 40 * self.params["sigma1"], self.params["m2"] + 40 * self.params["sigma2"])
        return invert_cdf(self.cdf, u, lo, hi, iterations=100)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.family == "normal":
            return p["m"] + p["sigma"] * rng.standard_normal(n)
        if self.family == "lognormal":
            return np.exp(p["m"] + p["sigma"] * rng.standard_normal(n))
        if self.family == "gamma":
            return rng.gamma(shape=p["p"], scale=1.0 / p["a"], size=n)
        first = rng.uniform(size=n) < p["p1"]
        a = p["m1"] + p["sigma1"] * rng.standard_normal(n)
        b = p["m2"] + p["sigma2"] * rng.standard_normal(n)
        return np.where(first, a, b)

    def moments(self) -> Tuple[float, float]:
        """(평균, 표준편차)"""
        dist = self._frozen()
        if dist is not None:
            return float(dist.mean()), float(dist.std())
        p = self.params
        w = p["p1"]
        mean = w * p["m1"] + (1 - w) * p["m2"]
        second = w * (p["sigma1"] ** 2 + p["m1"] ** 2) + (1 - w) * (p["sigma2"] ** 2 + p["m2"] ** 2)
        return mean, math.sqrt(max(second - mean ** 2, 0.0))

    @property
    def positive_support(self) -> bool:
        return self.family in ("lognormal", "gamma")

    def to_json_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}
