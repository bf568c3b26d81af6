"""모수 모형 카탈로그.

원형-선형 CL1–CL12, 원형-원형 CC1–CC12 결합 모형과 혼합 대립가설 H_δ.
각 모형은 이름 붙은 모수 사전(표의 기본값)과 구성 방식으로 정의된다.

구성 방식
- independent : f1(θ)·f2(s)
- link        : 2π g(2π(F1(θ) ± F2(s)))·f1(θ)·f2(s)   (Johnson–Wehrly, Wehrly–Johnson, Kato)
- mardia      : vM(θ)·N(z; m(θ), σ√(1−ρ1²−ρ2²))
- exponential : (λ²−κ²)^{1/2}/(2π)·exp{−λz + κz cos(θ−μ)}, z > 0
- qs          : {1 + 2πα cos(2πF1(θ))(1 − 2F2(z))}·f1·f2
- sine        : C exp{κ1 cos(θ−μ1) + κ2 cos(ψ−μ2) + λ sin(θ−μ1) sin(ψ−μ2)}
- wrappedNormal : 토러스 위의 감긴 이변량 정규
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import special, stats
from scipy.integrate import cumulative_trapezoid

from models.errors import NumericError, UsageError
from models.sample import (
    SUPPORT_CIRCLE_CIRCLE,
    SUPPORT_CIRCLE_LINE,
    DirDirSample,
    DirLinSample,
    unit_to_angles,
)
from services.circular_densities import (
    CDF_TABLE_NODES,
    CIRCULAR_FAMILIES,
    LINEAR_FAMILIES,
    CircularDensity,
    LinearDensity,
    invert_cdf,
    sample_von_mises,
    wrap_angle,
    wrapped_normal_terms,
)
from services.copula import (
    check_qs_alpha,
    link_angle,
    qs_copula_density,
    sample_link_copula,
    sample_qs_copula,
)
from services.quadrature import QuadratureGrid, line_factor_interval, make_grid, circle_factor
from services.special_math import TWO_PI

logger = logging.getLogger(__name__)

PI = math.pi
LINE_TAIL = 1e-8
SINE_NORMALIZER_NODES = 2048

Density = Union[CircularDensity, LinearDensity]


# ── 모형 명세 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class Component:
    """주변/링크 성분: 분포족 + (성분 모수 → 모형 모수 이름)"""
    family: str
    keys: Dict[str, str] = field(default_factory=dict)

    def values(self, params: Dict[str, float]) -> Dict[str, float]:
        return {k: params[v] for k, v in self.keys.items()}

    def to_model_keys(self, fitted: Dict[str, float]) -> Dict[str, float]:
        """성분 모수 적합값 → 모형 모수 이름"""
        return {self.keys[k]: v for k, v in fitted.items()}

    def build(self, params: Dict[str, float]) -> Density:
        values = self.values(params)
        if self.family == "kato":
            # Kato 링크: WC(0, ρ), ρ < 0 이면 WC(π, |ρ|)
            rho = values["rho"]
            if not abs(rho) < 1.0:
                raise UsageError(f"Kato copula requires |rho| < 1, got {rho}")
            return CircularDensity("wrappedCauchy", {"mu": 0.0 if rho >= 0 else PI, "rho": abs(rho)})
        if self.family in CIRCULAR_FAMILIES:
            return CircularDensity(self.family, values)
        if self.family in LINEAR_FAMILIES:
            return LinearDensity(self.family, values)
        raise UsageError(f"unknown component family {self.family!r}")


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    support: str
    construction: str
    description: str
    defaults: Dict[str, float]
    first: Optional[Component] = None
    second: Optional[Component] = None
    link: Optional[Component] = None
    sign: int = 0
    angle_keys: Tuple[str, ...] = ()
    deviation: str = "D1"

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(self.defaults)


def _c(family: str, **keys) -> Component:
    return Component(family, dict(keys))


_UNIFORM = _c("uniform")

_SPECS = [
    # ── 원형-선형 ──
    ModelSpec("CL1", SUPPORT_CIRCLE_LINE, "independent", "Independent von Mises and normal",
              {"mu": 3 * PI / 2, "kappa": 2.0, "m": 0.0, "sigma": 1.0},
              first=_c("vonMises", mu="mu", kappa="kappa"), second=_c("normal", m="m", sigma="sigma"),
              angle_keys=("mu",)),
    ModelSpec("CL2", SUPPORT_CIRCLE_LINE, "independent", "Independent wrapped Cauchy and log-normal",
              {"mu": 3 * PI / 2, "rho": 0.75, "m": 0.5, "sigma": 0.75},
              first=_c("wrappedCauchy", mu="mu", rho="rho"), second=_c("lognormal", m="m", sigma="sigma"),
              angle_keys=("mu",), deviation="D2"),
    ModelSpec("CL3", SUPPORT_CIRCLE_LINE, "independent", "Independent mixture of von Mises and gamma",
              {"p1": 0.5, "mu1": PI / 4, "kappa1": 2.0, "mu2": 5 * PI / 4, "kappa2": 2.0, "a": 1 / 3, "p": 3.0},
              first=_c("vmMixture", p1="p1", mu1="mu1", kappa1="kappa1", mu2="mu2", kappa2="kappa2"),
              second=_c("gamma", a="a", p="p"),
              angle_keys=("mu1", "mu2"), deviation="D2"),
    ModelSpec("CL4", SUPPORT_CIRCLE_LINE, "independent", "Independent wrapped normal and mixture of normals",
              {"m1": 3 * PI / 2, "sigma1": 1.0, "p1": 0.5, "m2": 0.0, "sigma2": 0.25, "m3": 2.0, "sigma3": 1.0},
              first=_c("wrappedNormal", mu="m1", sigma="sigma1"),
              second=_c("normalMixture", p1="p1", m1="m2", sigma1="sigma2", m2="m3", sigma2="sigma3"),
              angle_keys=("m1",)),
    ModelSpec("CL5", SUPPORT_CIRCLE_LINE, "independent", "Independent mixture of von Mises and of normals",
              {"p1": 0.5, "mu1": 5 * PI / 4, "kappa1": 10.0, "mu2": 7 * PI / 4, "kappa2": 3.0,
               "p3": 0.75, "m1": -1.0, "sigma1": 1.0, "m2": 2.0, "sigma2": 0.5},
              first=_c("vmMixture", p1="p1", mu1="mu1", kappa1="kappa1", mu2="mu2", kappa2="kappa2"),
              second=_c("normalMixture", p1="p3", m1="m1", sigma1="sigma1", m2="m2", sigma2="sigma2"),
              angle_keys=("mu1", "mu2")),
    ModelSpec("CL6", SUPPORT_CIRCLE_LINE, "mardia", "Normal conditioned on von Mises (Mardia–Sutton)",
              {"mu": 3 * PI / 2, "kappa": 1.0, "m": 0.0, "rho1": 0.5, "rho2": 0.5, "sigma": 0.5},
              first=_c("vonMises", mu="mu", kappa="kappa"), angle_keys=("mu",)),
    ModelSpec("CL7", SUPPORT_CIRCLE_LINE, "mardia", "Normal conditioned on von Mises (Mardia–Sutton)",
              {"mu": 3 * PI / 2, "kappa": 5.0, "m": 0.0, "rho1": 0.5, "rho2": -0.75, "sigma": 1.5},
              first=_c("vonMises", mu="mu", kappa="kappa"), angle_keys=("mu",)),
    ModelSpec("CL8", SUPPORT_CIRCLE_LINE, "link", "Johnson–Wehrly with von Mises link",
              {"m": 0.0, "sigma": 1.0, "mu_g": 5 * PI / 4, "kappa_g": 1.5},
              first=_UNIFORM, second=_c("normal", m="m", sigma="sigma"),
              link=_c("vonMises", mu="mu_g", kappa="kappa_g"), sign=1, angle_keys=("mu_g",)),
    ModelSpec("CL9", SUPPORT_CIRCLE_LINE, "link", "Johnson–Wehrly with von Mises mixture link",
              {"m": 0.0, "sigma": 0.5, "p_g1": 0.5, "mu_g1": PI / 4, "kappa_g1": 3.0,
               "mu_g2": 5 * PI / 4, "kappa_g2": 3.0},
              first=_UNIFORM, second=_c("normal", m="m", sigma="sigma"),
              link=_c("vmMixture", p1="p_g1", mu1="mu_g1", kappa1="kappa_g1", mu2="mu_g2", kappa2="kappa_g2"),
              sign=-1, angle_keys=("mu_g1", "mu_g2")),
    ModelSpec("CL10", SUPPORT_CIRCLE_LINE, "exponential", "Exponential conditioned on von Mises (Johnson–Wehrly)",
              {"mu": 3 * PI / 2, "kappa": 2.0, "lambda": 3.0}, angle_keys=("mu",)),
    ModelSpec("CL11", SUPPORT_CIRCLE_LINE, "qs", "QS copula with cardioid and normal marginals",
              {"mu": 3 * PI / 2, "rho": 0.45, "m": 1.0, "sigma": 0.5, "alpha": 1 / (2 * PI)},
              first=_c("cardioid", mu="mu", rho="rho"), second=_c("normal", m="m", sigma="sigma"),
              angle_keys=("mu",)),
    ModelSpec("CL12", SUPPORT_CIRCLE_LINE, "link", "Kato copula with von Mises and log-normal marginals",
              {"mu": 3 * PI / 2, "kappa": 1.0, "m": 0.5, "sigma": 0.75, "rho": 0.75},
              first=_c("vonMises", mu="mu", kappa="kappa"), second=_c("lognormal", m="m", sigma="sigma"),
              link=_c("kato", rho="rho"), sign=-1, angle_keys=("mu",), deviation="D2"),
    # ── 원형-원형 ──
    ModelSpec("CC1", SUPPORT_CIRCLE_CIRCLE, "independent", "Independent uniform and von Mises",
              {"mu": 0.0, "kappa": 2.0},
              first=_UNIFORM, second=_c("vonMises", mu="mu", kappa="kappa"),
              angle_keys=("mu",), deviation="D3"),
    ModelSpec("CC2", SUPPORT_CIRCLE_CIRCLE, "independent", "Independent von Mises and von Mises",
              {"mu1": 3 * PI / 2, "kappa1": 1.0, "mu2": PI, "kappa2": 3.0},
              first=_c("vonMises", mu="mu1", kappa="kappa1"), second=_c("vonMises", mu="mu2", kappa="kappa2"),
              angle_keys=("mu1", "mu2"), deviation="D3"),
    ModelSpec("CC3", SUPPORT_CIRCLE_CIRCLE, "independent", "Independent von Mises and wrapped Cauchy",
              {"mu1": 3 * PI / 2, "kappa": 2.0, "mu2": PI / 4, "rho": 0.7},
              first=_c("vonMises", mu="mu1", kappa="kappa"), second=_c("wrappedCauchy", mu="mu2", rho="rho"),
              angle_keys=("mu1", "mu2"), deviation="D3"),
    ModelSpec("CC4", SUPPORT_CIRCLE_CIRCLE, "independent", "Independent mixture of von Mises and cardioid",
              {"p1": 0.5, "mu1": 0.0, "kappa1": 10.0, "mu2": 3 * PI / 2, "kappa2": 10.0, "mu3": 0.0, "rho": 0.25},
              first=_c("vmMixture", p1="p1", mu1="mu1", kappa1="kappa1", mu2="mu2", kappa2="kappa2"),
              second=_c("cardioid", mu="mu3", rho="rho"),
              angle_keys=("mu1", "mu2", "mu3"), deviation="D3"),
    ModelSpec("CC5", SUPPORT_CIRCLE_CIRCLE, "independent", "Independent mixtures of von Mises",
              {"p1": 0.5, "mu1": 0.0, "kappa1": 3.0, "mu2": 3 * PI / 2, "kappa2": 3.0,
               "p3": 0.5, "mu3": PI / 4, "kappa3": 5.0, "mu4": 7 * PI / 4, "kappa4": 5.0},
              first=_c("vmMixture", p1="p1", mu1="mu1", kappa1="kappa1", mu2="mu2", kappa2="kappa2"),
              second=_c("vmMixture", p1="p3", mu1="mu3", kappa1="kappa3", mu2="mu4", kappa2="kappa4"),
              angle_keys=("mu1", "mu2", "mu3", "mu4"), deviation="D3"),
    ModelSpec("CC6", SUPPORT_CIRCLE_CIRCLE, "sine", "Sine model (Singh–Hnizdo–Demchuk)",
              {"mu1": 7 * PI / 8, "kappa1": 0.5, "mu2": 0.0, "kappa2": 1.0, "lambda": -3.0},
              angle_keys=("mu1", "mu2"), deviation="D3"),
    ModelSpec("CC7", SUPPORT_CIRCLE_CIRCLE, "sine", "Sine model (Singh–Hnizdo–Demchuk)",
              {"mu1": 0.0, "kappa1": 5.0, "mu2": 0.0, "kappa2": 1.0, "lambda": -5.0},
              angle_keys=("mu1", "mu2"), deviation="D3"),
    ModelSpec("CC8", SUPPORT_CIRCLE_CIRCLE, "link", "Wehrly–Johnson with von Mises link",
              {"mu": 0.0, "rho": 0.5, "mu_g": PI, "kappa_g": 7.0},
              first=_c("cardioid", mu="mu", rho="rho"), second=_UNIFORM,
              link=_c("vonMises", mu="mu_g", kappa="kappa_g"), sign=-1,
              angle_keys=("mu", "mu_g"), deviation="D3"),
    ModelSpec("CC9", SUPPORT_CIRCLE_CIRCLE, "link", "Wehrly–Johnson with von Mises mixture link",
              {"p_g1": 0.5, "mu_g1": PI / 4, "kappa_g1": 10.0, "mu_g2": 7 * PI / 4, "kappa_g2": 10.0},
              first=_UNIFORM, second=_UNIFORM,
              link=_c("vmMixture", p1="p_g1", mu1="mu_g1", kappa1="kappa_g1", mu2="mu_g2", kappa2="kappa_g2"),
              sign=1, angle_keys=("mu_g1", "mu_g2"), deviation="D3"),
    ModelSpec("CC10", SUPPORT_CIRCLE_CIRCLE, "wrappedNormal", "Wrapped bivariate normal",
              {"m1": 0.0, "m2": PI / 6, "sigma1": 1.5, "sigma2": 0.25, "rho": 0.0},
              angle_keys=("m1", "m2"), deviation="D3"),
    ModelSpec("CC11", SUPPORT_CIRCLE_CIRCLE, "wrappedNormal", "Wrapped bivariate normal",
              {"m1": 0.0, "m2": 0.0, "sigma1": 1.0, "sigma2": 1.0, "rho": -0.9},
              angle_keys=("m1", "m2"), deviation="D3"),
    ModelSpec("CC12", SUPPORT_CIRCLE_CIRCLE, "link", "Kato copula with von Mises marginals",
              {"mu1": 3 * PI / 4, "kappa1": 5.0, "mu2": 0.0, "kappa2": 1.0, "rho": 0.5},
              first=_c("vonMises", mu="mu1", kappa="kappa1"), second=_c("vonMises", mu="mu2", kappa="kappa2"),
              link=_c("kato", rho="rho"), sign=-1, angle_keys=("mu1", "mu2"), deviation="D3"),
]

MODEL_SPECS: Dict[str, ModelSpec] = {s.model_id: s for s in _SPECS}
CL_MODELS = tuple(f"CL{i}" for i in range(1, 13))
CC_MODELS = tuple(f"CC{i}" for i in range(1, 13))
CATALOG_IDS = CL_MODELS + CC_MODELS

# 혼합 편차 Δ1, Δ2, Δ3
DEVIATION_PARAMS = {"mu1": PI, "mu2": 0.0, "kappa": 3.0, "m1": 2.0, "sigma1": 1.0, "m2": 0.5, "sigma2": 0.5}
DEVIATIONS = ("D1", "D2", "D3")


# ── 결합 모형 ──────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class JointModel:
    """원형×직선 또는 토러스 위의 모수 밀도"""
    spec: ModelSpec
    params: Dict[str, float]
    first: Optional[Density] = None
    second: Optional[Density] = None
    link: Optional[CircularDensity] = None
    log_constant: float = 0.0                          # sine 모형 log C
    marginal_table: Optional[Tuple[np.ndarray, np.ndarray]] = None   # sine θ-주변 cdf 표

    @property
    def model_id(self) -> str:
        return self.spec.model_id

    @property
    def support(self) -> str:
        return self.spec.support

    @property
    def construction(self) -> str:
        return self.spec.construction

    @property
    def is_dirdir(self) -> bool:
        return self.support == SUPPORT_CIRCLE_CIRCLE

    @property
    def param_names(self) -> Tuple[str, ...]:
        return self.spec.param_names

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.params[k] for k in self.param_names])

    def with_params(self, params: Dict[str, float]) -> 'JointModel':
        return _build(self.spec, {**self.params, **params})

    def with_theta(self, theta) -> 'JointModel':
        return self.with_params(dict(zip(self.param_names, map(float, theta))))

    # -----------------------------------------------------------
    # 밀도
    # -----------------------------------------------------------

    def _mardia_mean_sd(self, theta):
        p = self.params
        m_theta = p["m"] + p["sigma"] * math.sqrt(p["kappa"]) * (
            p["rho1"] * (np.cos(theta) - math.cos(p["mu"])) + p["rho2"] * (np.sin(theta) - math.sin(p["mu"])))
        sd = p["sigma"] * math.sqrt(1.0 - p["rho1"] ** 2 - p["rho2"] ** 2)
        return m_theta, sd

    def _cl10_rate(self, theta):
        p = self.params
        return p["lambda"] - p["kappa"] * np.cos(theta - p["mu"])

    def pdf_angles(self, theta, s):
        """각도 θ와 두 번째 좌표 s (z 또는 ψ)에서의 밀도"""
        theta = np.asarray(theta, dtype=float)
        s = np.asarray(s, dtype=float)
        kind = self.construction
        p = self.params
        if kind == "independent":
            return self.first.pdf(theta) * self.second.pdf(s)
        if kind == "link":
            psi = link_angle(self.first.cdf(theta), self.second.cdf(s), self.spec.sign)
            return TWO_PI * self.link.pdf(psi) * self.first.pdf(theta) * self.second.pdf(s)
        if kind == "qs":
            c = qs_copula_density(self.first.cdf(theta), self.second.cdf(s), p["alpha"])
            return c * self.first.pdf(theta) * self.second.pdf(s)
        if kind == "mardia":
            m_theta, sd = self._mardia_mean_sd(theta)
            return self.first.pdf(theta) * stats.norm.pdf(s, loc=m_theta, scale=sd)
        if kind == "exponential":
            norm = math.sqrt(p["lambda"] ** 2 - p["kappa"] ** 2) / TWO_PI
            zpos = np.maximum(s, 0.0)
            return np.where(s > 0, norm * np.exp(-self._cl10_rate(theta) * zpos), 0.0)
        if kind == "sine":
            return np.exp(self.log_constant + _sine_exponent(p, theta, s))
        if kind == "wrappedNormal":
            return wrapped_bivariate_normal_pdf(p, theta, s)
        raise UsageError(f"unsupported construction {kind!r}")

    def logpdf_angles(self, theta, s):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf_angles(theta, s))

    def pdf(self, first_points, second):
        """단위 벡터 입력: first (N, 2), second (N,) 또는 (N, 2)"""
        theta = unit_to_angles(np.asarray(first_points, dtype=float))
        s = np.asarray(second, dtype=float)
        if self.is_dirdir:
            s = unit_to_angles(s)
        return self.pdf_angles(theta, s)

    def log_likelihood(self, sample) -> float:
        second = sample.psi if isinstance(sample, DirDirSample) else sample.z
        values = self.logpdf_angles(sample.theta, second)
        total = float(np.sum(values))
        return total if np.isfinite(total) else -math.inf

    # -----------------------------------------------------------
    # 표본추출
    # -----------------------------------------------------------

    def sample_angles(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        kind = self.construction
        p = self.params
        if kind == "independent":
            return self.first.sample(n, rng), self.second.sample(n, rng)
        if kind == "link":
            u, v = sample_link_copula(self.link, self.spec.sign, n, rng)
            return self.first.ppf(u), self.second.ppf(v)
        if kind == "qs":
            u, v = sample_qs_copula(n, rng, p["alpha"])
            return self.first.ppf(u), self.second.ppf(v)
        if kind == "mardia":
            theta = self.first.sample(n, rng)
            m_theta, sd = self._mardia_mean_sd(theta)
            return theta, m_theta + sd * rng.standard_normal(n)
        if kind == "exponential":
            # θ-주변은 (λ − κ cos(θ−μ))^{-1}에 비례: 수치 역변환
            theta = cl10_theta_marginal(p).ppf(rng.uniform(size=n))
            return theta, rng.exponential(size=n) / self._cl10_rate(theta)
        if kind == "sine":
            nodes, F = self.marginal_table
            theta = invert_cdf(lambda t: np.interp(t, nodes, F), rng.uniform(size=n), 0.0, TWO_PI)
            A, delta = _sine_conditional(p, theta)
            return theta, sample_von_mises(p["mu2"] + delta, A, rng)
        if kind == "wrappedNormal":
            cov = _bivariate_cov(p)
            xy = rng.multivariate_normal([p["m1"], p["m2"]], cov, size=n)
            return wrap_angle(xy[:, 0]), wrap_angle(xy[:, 1])
        raise UsageError(f"unsupported construction {kind!r}")

    def sample(self, n: int, rng: np.random.Generator):
        if n < 1:
            raise UsageError(f"sample size must be >= 1, got {n}")
        theta, s = self.sample_angles(n, rng)
        if self.is_dirdir:
            return DirDirSample.from_angles(theta, s)
        return DirLinSample.from_angles(theta, s)

    # -----------------------------------------------------------
    # 적분 범위
    # -----------------------------------------------------------

    def line_range(self, tail: float = LINE_TAIL) -> Tuple[float, float]:
        """선형 좌표의 질량 1 − O(tail) 구간"""
        if self.is_dirdir:
            raise UsageError("line range is undefined for circular-circular models")
        kind = self.construction
        if kind == "mardia":
            m_theta, sd = self._mardia_mean_sd(np.linspace(0.0, TWO_PI, 256))
            zq = float(stats.norm.isf(tail))
            return float(np.min(m_theta)) - zq * sd, float(np.max(m_theta)) + zq * sd
        if kind == "exponential":
            p = self.params
            return 0.0, -math.log(tail) / (p["lambda"] - p["kappa"])
        second = self.second
        lo = 0.0 if second.positive_support else float(second.ppf(tail))
        return lo, float(second.ppf(1.0 - tail))

    def to_kv_text(self) -> str:
        lines = [f"model={self.model_id}"]
        lines += [f"{k}={self.params[k]:.17g}" for k in self.param_names]
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        return {"model": self.model_id, "params": {k: self.params[k] for k in self.param_names}}


# ── 구성 보조 함수 ──────────────────────────────────────────────────


def _sine_exponent(p: Dict[str, float], theta, psi):
    a = theta - p["mu1"]
    b = psi - p["mu2"]
    return p["kappa1"] * np.cos(a) + p["kappa2"] * np.cos(b) + p["lambda"] * np.sin(a) * np.sin(b)


def _sine_conditional(p: Dict[str, float], theta):
    """ψ | θ ~ vM(μ2 + δ(θ), A(θ))"""
    s = np.sin(theta - p["mu1"])
    A = np.sqrt(p["kappa2"] ** 2 + (p["lambda"] * s) ** 2)
    delta = np.arctan2(p["lambda"] * s, p["kappa2"])
    return A, delta


def _sine_log_marginal_kernel(p: Dict[str, float], theta):
    """log[2π I0(A(θ)) e^{κ1 cos(θ−μ1)}]"""
    A, _ = _sine_conditional(p, theta)
    return math.log(TWO_PI) + np.log(special.i0e(A)) + A + p["kappa1"] * np.cos(theta - p["mu1"])


def sine_log_normalizer(p: Dict[str, float]) -> float:
    """log C. ψ를 해석적으로 적분한 θ 위의 사다리꼴."""
    theta = TWO_PI * np.arange(SINE_NORMALIZER_NODES) / SINE_NORMALIZER_NODES
    logk = _sine_log_marginal_kernel(p, theta)
    shift = float(np.max(logk))
    mass = float(np.sum(np.exp(logk - shift))) * TWO_PI / SINE_NORMALIZER_NODES
    return -(shift + math.log(mass))


def sine_log_pdf(p: Dict[str, float], theta, psi):
    return sine_log_normalizer(p) + _sine_exponent(p, theta, psi)


def _sine_normalizer(p: Dict[str, float]) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
    """log C 와 θ-주변 cdf 표"""
    log_c = sine_log_normalizer(p)
    nodes = np.linspace(0.0, TWO_PI, CDF_TABLE_NODES + 1)
    F = cumulative_trapezoid(np.exp(_sine_log_marginal_kernel(p, nodes) + log_c), nodes, initial=0.0)
    F = np.maximum.accumulate(F / F[-1])
    F[-1] = 1.0
    nodes.setflags(write=False)
    F.setflags(write=False)
    return log_c, (nodes, F)


def _bivariate_cov(p: Dict[str, float]) -> np.ndarray:
    s1, s2, r = p["sigma1"], p["sigma2"], p["rho"]
    return np.array([[s1 * s1, r * s1 * s2], [r * s1 * s2, s2 * s2]])


def wrapped_bivariate_normal_pdf(p: Dict[str, float], theta, psi):
    s1, s2, r = p["sigma1"], p["sigma2"], p["rho"]
    d1 = np.mod(theta - p["m1"] + PI, TWO_PI) - PI
    d2 = np.mod(psi - p["m2"] + PI, TWO_PI) - PI
    P1, P2 = wrapped_normal_terms(s1), wrapped_normal_terms(s2)
    shift1 = TWO_PI * np.arange(-P1, P1 + 1)
    shift2 = TWO_PI * np.arange(-P2, P2 + 1)
    u = (d1[..., None, None] + shift1[:, None]) / s1
    v = (d2[..., None, None] + shift2[None, :]) / s2
    one_r2 = 1.0 - r * r
    quad = (u * u + v * v - 2.0 * r * u * v) / one_r2
    terms = np.exp(-0.5 * quad) / (TWO_PI * s1 * s2 * math.sqrt(one_r2))
    return np.sum(terms, axis=(-2, -1))


def cl10_theta_marginal(p: Dict[str, float]) -> CircularDensity:
    """(λ²−κ²)^{1/2} / (2π(λ − κ cos(θ−μ)))는 ρ = (λ − √(λ²−κ²))/κ 인 감긴 코시"""
    lam, kappa = p["lambda"], p["kappa"]
    rho = 0.0 if kappa == 0 else (lam - math.sqrt(lam * lam - kappa * kappa)) / kappa
    mu = p["mu"] if rho >= 0 else p["mu"] + PI
    return CircularDensity("wrappedCauchy", {"mu": mu % TWO_PI, "rho": abs(rho)})


def _validate(spec: ModelSpec, p: Dict[str, float]) -> None:
    kind = spec.construction
    if kind == "mardia":
        if not p["sigma"] > 0 or p["kappa"] < 0:
            raise UsageError(f"{spec.model_id}: sigma must be positive and kappa >= 0")
        if not p["rho1"] ** 2 + p["rho2"] ** 2 < 1.0:
            raise UsageError(f"{spec.model_id}: rho1² + rho2² must be < 1, got "
                             f"{p['rho1'] ** 2 + p['rho2'] ** 2}")
    elif kind == "exponential":
        if not (0.0 <= p["kappa"] < p["lambda"]):
            raise UsageError(f"{spec.model_id}: requires 0 <= kappa < lambda, got kappa={p['kappa']}, "
                             f"lambda={p['lambda']}")
    elif kind == "qs":
        check_qs_alpha(p["alpha"])
    elif kind == "sine":
        if p["kappa1"] < 0 or p["kappa2"] < 0:
            raise UsageError(f"{spec.model_id}: concentrations must be >= 0")
    elif kind == "wrappedNormal":
        if not (p["sigma1"] > 0 and p["sigma2"] > 0 and abs(p["rho"]) < 1.0):
            raise UsageError(f"{spec.model_id}: requires sigma1, sigma2 > 0 and |rho| < 1")


def _build(spec: ModelSpec, params: Dict[str, float]) -> JointModel:
    p = {k: float(params[k]) for k in spec.param_names}
    bad = [k for k, v in p.items() if not math.isfinite(v)]
    if bad:
        raise UsageError(f"{spec.model_id}: non-finite parameters {bad}")
    _validate(spec, p)
    first = spec.first.build(p) if spec.first is not None else None
    second = spec.second.build(p) if spec.second is not None else None
    link = spec.link.build(p) if spec.link is not None else None
    log_c, table = 0.0, None
    if spec.construction == "sine":
        log_c, table = _sine_normalizer(p)
    return JointModel(spec=spec, params=p, first=first, second=second, link=link,
                      log_constant=log_c, marginal_table=table)


def make_model(model_id: str, overrides: Optional[Dict[str, float]] = None) -> JointModel:
    """카탈로그 모형 (표의 기본 모수, overrides로 일부 교체)"""
    if model_id not in MODEL_SPECS:
        raise UsageError(f"unknown model {model_id!r}; choose from {', '.join(CATALOG_IDS)} or custom")
    spec = MODEL_SPECS[model_id]
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(spec.param_names))
    if unknown:
        raise UsageError(f"{model_id}: unknown parameters {unknown}; expected {list(spec.param_names)}")
    return _build(spec, {**spec.defaults, **overrides})


def custom_model(first: Density, second: Density, link: Optional[CircularDensity] = None,
                 sign: int = 1) -> JointModel:
    """사용자 지정 독립/링크 모형. 모수 이름은 x_, y_, g_ 접두어를 붙인다."""
    if not isinstance(first, CircularDensity):
        raise UsageError("custom model: first component must be circular")
    support = SUPPORT_CIRCLE_CIRCLE if isinstance(second, CircularDensity) else SUPPORT_CIRCLE_LINE
    defaults, parts = {}, {}
    for prefix, density, slot in (("x_", first, "first"), ("y_", second, "second"), ("g_", link, "link")):
        if density is None:
            continue
        keys = {k: prefix + k for k in density.params}
        defaults.update({prefix + k: v for k, v in density.params.items()})
        parts[slot] = Component(density.family, keys)
    angle_keys = tuple(k for k in defaults if k.split("_", 1)[1].startswith("mu"))
    spec = ModelSpec("custom", support, "link" if link is not None else "independent",
                     f"custom {first.family} x {second.family}" + (f" with {link.family} link" if link else ""),
                     defaults, first=parts["first"], second=parts["second"], link=parts.get("link"),
                     sign=sign if link is not None else 0, angle_keys=angle_keys,
                     deviation="D3" if support == SUPPORT_CIRCLE_CIRCLE else "D1")
    return _build(spec, defaults)


def parse_custom(text: str) -> JointModel:
    """"vonMises:mu=0,kappa=1;normal:m=0,sigma=1[;vonMises:mu=0,kappa=2;+]" 형식"""
    parts = [t.strip() for t in text.split(";") if t.strip()]
    if len(parts) not in (2, 3, 4):
        raise UsageError(f"custom model needs 'first;second[;link;sign]', got {text!r}")

    def density(token: str) -> Density:
        family, _, body = token.partition(":")
        params = {}
        for kv in filter(None, (s.strip() for s in body.split(","))):
            key, _, value = kv.partition("=")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"custom model: bad parameter {kv!r}")
        family = family.strip()
        if family in CIRCULAR_FAMILIES:
            return CircularDensity(family, params)
        return LinearDensity(family, params)

    first, second = density(parts[0]), density(parts[1])
    link = density(parts[2]) if len(parts) >= 3 else None
    sign = -1 if len(parts) == 4 and parts[3] == "-" else 1
    return custom_model(first, second, link, sign)


def model_from_kv(values: Dict[str, str]) -> JointModel:
    """to_kv_text의 역. 키 model과 모수 키들."""
    model_id = values.get("model")
    if model_id is None:
        raise UsageError("model parameter map needs a 'model' key")
    try:
        params = {k: float(v) for k, v in values.items() if k != "model"}
    except ValueError as e:
        raise UsageError(f"model parameter map: {e}")
    return make_model(model_id, params)


# ── 밀도/분포 함수 (모듈 수준) ──────────────────────────────────────────────────


def pdf(model, first_points, second):
    return model.pdf(first_points, second)


def cdf_circular(density: CircularDensity, theta):
    return density.cdf(theta)


def cdf_linear(density: LinearDensity, z):
    return density.cdf(z)


def sample_circular(density: CircularDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise UsageError(f"sample size must be >= 1, got {n}")
    return density.sample(n, rng)


# ── 혼합 대립가설 ──────────────────────────────────────────────────


def deviation_model(name: str) -> JointModel:
    d = DEVIATION_PARAMS
    if name == "D1":
        return custom_model(CircularDensity("vonMises", {"mu": d["mu1"], "kappa": d["kappa"]}),
                            LinearDensity("normal", {"m": d["m1"], "sigma": d["sigma1"]}))
    if name == "D2":
        return custom_model(CircularDensity("vonMises", {"mu": d["mu1"], "kappa": d["kappa"]}),
                            LinearDensity("lognormal", {"m": d["m2"], "sigma": d["sigma2"]}))
    if name == "D3":
        return custom_model(CircularDensity("vonMises", {"mu": d["mu2"], "kappa": d["kappa"]}),
                            CircularDensity("vonMises", {"mu": d["mu1"], "kappa": d["kappa"]}))
    raise UsageError(f"unknown deviation {name!r}; choose from {DEVIATIONS}")


@dataclass(frozen=True)
class MixtureAlternative:
    """H_δ: (1 − δ) f_θ0 + δ Δ"""
    base: JointModel
    delta: float
    deviation: str

    def __post_init__(self):
        if not (0.0 <= self.delta <= 1.0):
            raise UsageError(f"delta must lie in [0, 1], got {self.delta}")
        dev = deviation_model(self.deviation)
        if dev.support != self.base.support:
            raise UsageError(f"deviation {self.deviation} does not match support {self.base.support}")
        object.__setattr__(self, "_deviation_model", dev)

    @property
    def deviation_model(self) -> JointModel:
        return self._deviation_model

    @property
    def model_id(self) -> str:
        return self.base.model_id

    @property
    def support(self) -> str:
        return self.base.support

    @property
    def is_dirdir(self) -> bool:
        return self.base.is_dirdir

    @property
    def label(self) -> str:
        return f"{self.base.model_id}+{self.delta:g}*{self.deviation}"

    def pdf_angles(self, theta, s):
        base = self.base.pdf_angles(theta, s)
        if self.delta == 0.0:
            return base
        return (1.0 - self.delta) * base + self.delta * self.deviation_model.pdf_angles(theta, s)

    def pdf(self, first_points, second):
        base = self.base.pdf(first_points, second)
        if self.delta == 0.0:
            return base
        return (1.0 - self.delta) * base + self.delta * self.deviation_model.pdf(first_points, second)

    def sample(self, n: int, rng: np.random.Generator):
        if n < 1:
            raise UsageError(f"sample size must be >= 1, got {n}")
        from_deviation = rng.uniform(size=n) < self.delta
        k = int(np.count_nonzero(from_deviation))
        theta = np.empty(n)
        s = np.empty(n)
        if k < n:
            t0, s0 = self.base.sample_angles(n - k, rng)
            theta[~from_deviation], s[~from_deviation] = t0, s0
        if k > 0:
            t1, s1 = self.deviation_model.sample_angles(k, rng)
            theta[from_deviation], s[from_deviation] = t1, s1
        if self.is_dirdir:
            return DirDirSample.from_angles(theta, s)
        return DirLinSample.from_angles(theta, s)

    def line_range(self, tail: float = LINE_TAIL) -> Tuple[float, float]:
        lo0, hi0 = self.base.line_range(tail)
        if self.delta == 0.0:
            return lo0, hi0
        lo1, hi1 = self.deviation_model.line_range(tail)
        return min(lo0, lo1), max(hi0, hi1)


def make_alternative(base: JointModel, delta: float, deviation: Optional[str] = None) -> MixtureAlternative:
    """모형별 기본 편차: CL2, CL3, CL12는 Δ2, 나머지 CL은 Δ1, CC는 Δ3"""
    return MixtureAlternative(base=base, delta=float(delta), deviation=deviation or base.spec.deviation)


def sample_joint(model, n: int, rng: np.random.Generator):
    """JointModel 또는 MixtureAlternative에서 n개 표본"""
    if not isinstance(model, (JointModel, MixtureAlternative)):
        raise UsageError(f"cannot sample from {type(model).__name__}")
    return model.sample(n, rng)


# ── 적분 격자 ──────────────────────────────────────────────────


def model_grid(model, n_first: int = 256, n_second: int = 256, tail: float = LINE_TAIL) -> QuadratureGrid:
    """모형 질량 거의 전부를 덮는 적분 격자 (정규화·평활용)"""
    if model.is_dirdir:
        return make_grid(SUPPORT_CIRCLE_CIRCLE, n_first, n_second)
    lo, hi = model.line_range(tail)
    if not hi > lo:
        raise NumericError(f"{model.model_id}: empty line range [{lo}, {hi}]")
    return QuadratureGrid(support=SUPPORT_CIRCLE_LINE, first=circle_factor(n_first),
                          second=line_factor_interval(n_second, lo, hi))
