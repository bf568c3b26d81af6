"""결합 모형 최대우도 적합.

- independent : 주변별 적합
- link / qs   : 2단계 (주변 적합 → 의사관측치 Ψ = 2π(F̂1 ± F̂2)에 링크 적합)
- mardia      : 회귀 시작점 + Nelder–Mead (전체 로그우도)
- exponential : 닫힌 형태 (fit_cl10)
- sine, wrappedNormal : Nelder–Mead (전체 로그우도)
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from models.errors import DataError, NumericError, UsageError
from models.results import FitResult
from models.sample import DirDirSample, DirLinSample
from services.circular_densities import circular_mean, circular_pdf, wrap_angle
from services.copula import link_angle
from services.marginal_fitting import NM_RESTARTS, fit_marginal, nelder_mead, solve_kappa
from services.model_catalog import (
    JointModel,
    make_model,
    sine_log_normalizer,
    wrapped_bivariate_normal_pdf,
)
from services.rng_streams import make_stream

logger = logging.getLogger(__name__)

# 방법 우선순위 (독립 모형에서 두 주변 방법 중 대표값)
_METHOD_RANK = {"closedForm": 0, "newton1D": 1, "nelderMead": 2, "em": 3}


def _second_coordinate(sample) -> np.ndarray:
    return sample.psi if isinstance(sample, DirDirSample) else sample.z


def _check_sample(model: JointModel, sample) -> None:
    if sample.n < 2:
        raise DataError(f"insufficient data: {model.model_id} fit needs n >= 2, got {sample.n}")
    if sample.support != model.support:
        raise DataError(f"support mismatch: {model.model_id} is {model.support}, sample is {sample.support}")


def _finish(model: JointModel, params: Dict[str, float], sample, converged: bool, iterations: int,
            method: str, start_ll: Optional[float] = None, notes: str = "") -> FitResult:
    for key in model.spec.angle_keys:
        params[key] = float(wrap_angle(params[key]))
    ordered = {k: float(params[k]) for k in model.param_names}
    ll = model.with_params(ordered).log_likelihood(sample)
    if converged and not math.isfinite(ll):
        logger.warning(f"{model.model_id}: fitted log-likelihood is not finite")
        converged = False
    return FitResult(family=model.model_id, theta_hat=ordered, log_likelihood=ll,
                     converged=converged, iterations=iterations, method=method,
                     start_log_likelihood=start_ll, notes=notes)


# ── 주변 / 2단계 ──────────────────────────────────────────────────


def _fit_components(model: JointModel, theta: np.ndarray, second: np.ndarray,
                    rng: np.random.Generator) -> Tuple[Dict[str, float], List[FitResult]]:
    spec = model.spec
    params: Dict[str, float] = {}
    fits = []
    for component, data in ((spec.first, theta), (spec.second, second)):
        fit = fit_marginal(component.family, data, rng)
        params.update(component.to_model_keys(fit.theta_hat))
        fits.append(fit)
    return params, fits


def _fit_independent(model: JointModel, sample, rng: np.random.Generator) -> FitResult:
    params, fits = _fit_components(model, sample.theta, _second_coordinate(sample), rng)
    method = max((f.method for f in fits), key=_METHOD_RANK.get)
    return _finish(model, params, sample, all(f.converged for f in fits),
                   sum(f.iterations for f in fits), method)


def _fit_two_step(model: JointModel, sample, rng: np.random.Generator) -> FitResult:
    """1단계 주변 ML, 2단계 의사관측치 위의 코퓰라 ML"""
    spec = model.spec
    theta, second = sample.theta, _second_coordinate(sample)
    params, fits = _fit_components(model, theta, second, rng)
    iterations = sum(f.iterations for f in fits)
    converged = all(f.converged for f in fits)
    if spec.construction == "qs":
        params["alpha"] = model.params["alpha"]
    else:
        marginal = model.with_params(params)
        psi = link_angle(marginal.first.cdf(theta), marginal.second.cdf(second), spec.sign)
        link_fit = fit_marginal(spec.link.family, psi, rng)
        params.update(spec.link.to_model_keys(link_fit.theta_hat))
        iterations += link_fit.iterations
        converged = converged and link_fit.converged
    return _finish(model, params, sample, converged, iterations, "twoStep")


# ── CL10 닫힌 형태 ──────────────────────────────────────────────────


def fit_cl10(sample: DirLinSample, model: Optional[JointModel] = None) -> FitResult:
    """λ̂ = Z̄/(Z̄² − Z̄_c²), κ̂ = (λ̂² − λ̂/Z̄)^{1/2}, Σ Z_i sin(Θ_i − μ̂) = 0.

    μ̂ 는 Z̄_c > 0 인 가지 (우도 최대).
    """
    model = model or make_model("CL10")
    _check_sample(model, sample)
    theta, z = sample.theta, sample.z
    if np.any(z <= 0):
        raise DataError("CL10 fit: all z must be positive")
    c, s = float(np.mean(z * np.cos(theta))), float(np.mean(z * np.sin(theta)))
    mu = float(wrap_angle(math.atan2(s, c)))
    z_bar = float(np.mean(z))
    z_c = float(np.mean(z * np.cos(theta - mu)))
    denom = z_bar ** 2 - z_c ** 2
    if not denom > 1e-14 * z_bar ** 2:
        raise NumericError("degenerate sample for CL10 fit: (Z̄)² <= (Z̄_c)²")
    lam = z_bar / denom
    disc = lam * lam - lam / z_bar
    if disc < 0:
        raise NumericError("degenerate sample for CL10 fit: λ̂² < λ̂/Z̄")
    kappa = math.sqrt(disc)
    return _finish(model, {"mu": mu, "kappa": kappa, "lambda": lam}, sample, True, 0, "closedForm")


# ── Nelder–Mead 적합 ──────────────────────────────────────────────────


def _logistic(t: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * t))


def _logit(p: float) -> float:
    p = min(max(p, 1e-6), 1.0 - 1e-6)
    return math.log(p / (1.0 - p))


def _mardia_log_likelihood(p: Dict[str, float], theta: np.ndarray, z: np.ndarray) -> float:
    r2 = p["rho1"] ** 2 + p["rho2"] ** 2
    if not (p["sigma"] > 0 and p["kappa"] >= 0 and r2 < 1.0):
        return -math.inf
    m_theta = p["m"] + p["sigma"] * math.sqrt(p["kappa"]) * (
        p["rho1"] * (np.cos(theta) - math.cos(p["mu"])) + p["rho2"] * (np.sin(theta) - math.sin(p["mu"])))
    sd = p["sigma"] * math.sqrt(1.0 - r2)
    with np.errstate(divide="ignore"):
        total = float(np.sum(np.log(circular_pdf("vonMises", p, theta)))
                      + np.sum(stats.norm.logpdf(z, loc=m_theta, scale=sd)))
    return total if math.isfinite(total) else -math.inf


def _mardia_params(t: np.ndarray) -> Dict[str, float]:
    r = _logistic(t[3])
    return {"mu": float(t[0]), "kappa": math.exp(t[1]), "m": float(t[2]),
            "rho1": r * math.cos(t[4]), "rho2": r * math.sin(t[4]), "sigma": math.exp(t[5])}


def _mardia_vector(p: Dict[str, float]) -> np.ndarray:
    r = math.hypot(p["rho1"], p["rho2"])
    return np.array([p["mu"], math.log(max(p["kappa"], 1e-6)), p["m"], _logit(r),
                     math.atan2(p["rho2"], p["rho1"]), math.log(p["sigma"])])


def _mardia_start(theta: np.ndarray, z: np.ndarray) -> Dict[str, float]:
    """θ에 vM 적합, z를 (cos θ − cos μ̂, sin θ − sin μ̂)에 회귀"""
    mu, rbar = circular_mean(theta)
    kappa = max(solve_kappa(rbar)[0], 1e-3)
    X = np.column_stack([np.ones_like(theta), np.cos(theta) - math.cos(mu), np.sin(theta) - math.sin(mu)])
    coef, *_ = np.linalg.lstsq(X, z, rcond=None)
    resid = z - X @ coef
    v = max(float(np.mean(resid ** 2)), 1e-12)
    b1, b2 = float(coef[1]), float(coef[2])
    sigma = math.sqrt(v + (b1 * b1 + b2 * b2) / kappa)
    scale = sigma * math.sqrt(kappa)
    rho1, rho2 = b1 / scale, b2 / scale
    r = math.hypot(rho1, rho2)
    if r > 0.99:
        rho1, rho2 = 0.99 * rho1 / r, 0.99 * rho2 / r
    return {"mu": mu, "kappa": kappa, "m": float(coef[0]), "rho1": rho1, "rho2": rho2, "sigma": sigma}


def _sine_log_likelihood(p: Dict[str, float], theta: np.ndarray, psi: np.ndarray) -> float:
    a, b = theta - p["mu1"], psi - p["mu2"]
    exponent = p["kappa1"] * np.cos(a) + p["kappa2"] * np.cos(b) + p["lambda"] * np.sin(a) * np.sin(b)
    total = theta.size * sine_log_normalizer(p) + float(np.sum(exponent))
    return total if math.isfinite(total) else -math.inf


def _sine_params(t: np.ndarray) -> Dict[str, float]:
    return {"mu1": float(t[0]), "kappa1": math.exp(t[1]), "mu2": float(t[2]),
            "kappa2": math.exp(t[3]), "lambda": float(t[4])}


def _sine_vector(p: Dict[str, float]) -> np.ndarray:
    return np.array([p["mu1"], math.log(max(p["kappa1"], 1e-6)), p["mu2"],
                     math.log(max(p["kappa2"], 1e-6)), p["lambda"]])


def _sine_start(theta: np.ndarray, psi: np.ndarray) -> Dict[str, float]:
    mu1, r1 = circular_mean(theta)
    mu2, r2 = circular_mean(psi)
    k1 = max(solve_kappa(r1)[0], 1e-3)
    k2 = max(solve_kappa(r2)[0], 1e-3)
    corr = float(np.corrcoef(np.sin(theta - mu1), np.sin(psi - mu2))[0, 1])
    lam = (corr if math.isfinite(corr) else 0.0) * math.sqrt(k1 * k2)
    return {"mu1": mu1, "kappa1": k1, "mu2": mu2, "kappa2": k2, "lambda": lam}


def _wn_log_likelihood(p: Dict[str, float], theta: np.ndarray, psi: np.ndarray) -> float:
    if not (p["sigma1"] > 0 and p["sigma2"] > 0 and abs(p["rho"]) < 1.0):
        return -math.inf
    with np.errstate(divide="ignore"):
        total = float(np.sum(np.log(wrapped_bivariate_normal_pdf(p, theta, psi))))
    return total if math.isfinite(total) else -math.inf


def _wn_params(t: np.ndarray) -> Dict[str, float]:
    return {"m1": float(t[0]), "m2": float(t[1]), "sigma1": math.exp(t[2]),
            "sigma2": math.exp(t[3]), "rho": math.tanh(t[4])}


def _wn_vector(p: Dict[str, float]) -> np.ndarray:
    return np.array([p["m1"], p["m2"], math.log(p["sigma1"]), math.log(p["sigma2"]),
                     math.atanh(max(min(p["rho"], 0.999), -0.999))])


def _wn_start(theta: np.ndarray, psi: np.ndarray) -> Dict[str, float]:
    m1, r1 = circular_mean(theta)
    m2, r2 = circular_mean(psi)
    s1 = math.sqrt(-2.0 * math.log(min(max(r1, 1e-6), 0.999)))
    s2 = math.sqrt(-2.0 * math.log(min(max(r2, 1e-6), 0.999)))
    corr = float(np.corrcoef(np.sin(theta - m1), np.sin(psi - m2))[0, 1])
    rho = float(np.clip(corr if math.isfinite(corr) else 0.0, -0.95, 0.95))
    return {"m1": m1, "m2": m2, "sigma1": s1, "sigma2": s2, "rho": rho}


# construction → (로그우도, 벡터→모수, 모수→벡터, 적률 시작점)
_NM_MODELS: Dict[str, Tuple[Callable, Callable, Callable, Callable]] = {
    "mardia": (_mardia_log_likelihood, _mardia_params, _mardia_vector, _mardia_start),
    "sine": (_sine_log_likelihood, _sine_params, _sine_vector, _sine_start),
    "wrappedNormal": (_wn_log_likelihood, _wn_params, _wn_vector, _wn_start),
}


def _fit_nelder_mead(model: JointModel, sample, rng: np.random.Generator,
                     start: Optional[Dict[str, float]], restarts: int) -> FitResult:
    loglik, to_params, to_vector, moment_start = _NM_MODELS[model.construction]
    theta, second = sample.theta, _second_coordinate(sample)
    p0 = dict(start) if start is not None else moment_start(theta, second)
    outcome = nelder_mead(lambda t: -loglik(to_params(t), theta, second), to_vector(p0), rng,
                          restarts=restarts)
    if not outcome.converged:
        logger.warning(f"{model.model_id}: Nelder–Mead hit the evaluation budget "
                       f"({outcome.evaluations} evaluations); keeping best-found parameters")
    params = to_params(outcome.x)
    notes = "warm start" if start is not None else ""
    return _finish(model, params, sample, outcome.converged, outcome.evaluations, "nelderMead",
                   start_ll=-outcome.start_fun, notes=notes)


# ── 진입점 ──────────────────────────────────────────────────


def fit_joint(model: Union[str, JointModel], sample, rng: Optional[np.random.Generator] = None,
              start: Optional[Dict[str, float]] = None, restarts: int = NM_RESTARTS) -> FitResult:
    """카탈로그(또는 사용자 지정) 결합 모형의 ML 적합.

    start는 Nelder–Mead 모형의 시작점 (부트스트랩 재적합에서 원 적합값을 넘긴다).
    """
    if isinstance(model, str):
        model = make_model(model)
    _check_sample(model, sample)
    if rng is None:
        rng = make_stream(0, "fit_joint", model.model_id)
    kind = model.construction
    if kind == "independent":
        return _fit_independent(model, sample, rng)
    if kind in ("link", "qs"):
        return _fit_two_step(model, sample, rng)
    if kind == "exponential":
        return fit_cl10(sample, model)
    if kind in _NM_MODELS:
        return _fit_nelder_mead(model, sample, rng, start, restarts)
    raise UsageError(f"no fitter for construction {kind!r}")


def fitted_model(model: JointModel, fit: FitResult) -> JointModel:
    return model.with_params(fit.theta_hat)
