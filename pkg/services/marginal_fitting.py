"""주변 분포 최대우도 적합.

- normal / lognormal: 닫힌 형태
- gamma: digamma 방정식 Newton
- vonMises: μ̂ = atan2(S̄, C̄), κ̂는 A1(κ) = R̄ 의 구간 보호 Newton (실패 시 brentq)
- cardioid / wrappedCauchy / wrappedNormal / kato 링크: Nelder–Mead (시작점 + 10% 흔든 재시작 3회)
- vmMixture / normalMixture: EM (성분 2개, 무작위 재시작 10회)
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import optimize, special, stats

from models.errors import DataError, NumericError, UsageError
from models.results import FitResult
from services.circular_densities import (
    CIRCULAR_FAMILIES,
    LINEAR_FAMILIES,
    LinearDensity,
    circular_mean,
    circular_pdf,
    wrap_angle,
)
from services.rng_streams import make_stream
from services.special_math import TWO_PI, bessel_ratio

logger = logging.getLogger(__name__)

KAPPA_CAP = 1e4
NM_MAX_EVALS = 2000
NM_RESTARTS = 3
NM_JITTER = 0.10
EM_MAX_ITER = 200
EM_TOL = 1e-8
EM_RESTARTS = 10

MARGINAL_FAMILIES = tuple(CIRCULAR_FAMILIES) + tuple(LINEAR_FAMILIES) + ("kato",)


# ── 공통 ──────────────────────────────────────────────────


def _check_data(family: str, data, min_n: int = 2) -> np.ndarray:
    x = np.asarray(data, dtype=float).ravel()
    if x.size < min_n:
        raise DataError(f"insufficient data: {family} fit needs n >= {min_n}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{family} fit: data contain non-finite values")
    return x


def marginal_log_likelihood(family: str, params: Dict[str, float], data) -> float:
    x = np.asarray(data, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "kato":
            values = np.log(_kato_pdf(params["rho"], x))
        elif family in CIRCULAR_FAMILIES:
            values = np.log(circular_pdf(family, params, x))
        else:
            values = LinearDensity(family, params).logpdf(x)
    total = float(np.sum(values))
    return total if np.isfinite(total) else -math.inf


def _kato_pdf(rho: float, psi):
    """WC(0, ρ), ρ ∈ (−1, 1)"""
    return (1.0 - rho * rho) / (TWO_PI * (1.0 + rho * rho - 2.0 * rho * np.cos(psi)))


@dataclass
class OptimizeOutcome:
    x: np.ndarray
    fun: float
    converged: bool
    evaluations: int
    start_fun: float


def nelder_mead(objective: Callable[[np.ndarray], float], start: np.ndarray,
                rng: np.random.Generator, restarts: int = NM_RESTARTS,
                max_evals: int = NM_MAX_EVALS) -> OptimizeOutcome:
    """시작점 + 10% 흔든 재시작. 최솟값이 같으면 앞선 시도를 유지."""
    start = np.asarray(start, dtype=float)
    starts = [start]
    for _ in range(restarts):
        u = rng.uniform(-1.0, 1.0, size=start.shape)
        starts.append(start * (1.0 + NM_JITTER * u) + NM_JITTER * u * (start == 0))

    def safe(x):
        value = objective(x)
        return value if math.isfinite(value) else 1e300

    start_fun = safe(start)
    best: Optional[OptimizeOutcome] = None
    evaluations = 0
    for x0 in starts:
        res = optimize.minimize(safe, x0, method="Nelder-Mead",
                                options={"maxfev": max_evals, "xatol": 1e-8, "fatol": 1e-10})
        evaluations += int(res.nfev)
        if best is None or res.fun < best.fun:
            best = OptimizeOutcome(x=np.asarray(res.x), fun=float(res.fun), converged=bool(res.success),
                                   evaluations=0, start_fun=start_fun)
        elif res.fun == best.fun:
            best.converged = best.converged or bool(res.success)
    best.evaluations = evaluations
    return best


# ── von Mises 집중도 ──────────────────────────────────────────────────


def _kappa_start(rbar: float) -> float:
    if rbar < 0.53:
        return 2 * rbar + rbar ** 3 + 5 * rbar ** 5 / 6
    if rbar < 0.85:
        return -0.4 + 1.39 * rbar + 0.43 / (1 - rbar)
    return 1.0 / (rbar ** 3 - 4 * rbar ** 2 + 3 * rbar)


def solve_kappa(rbar: float) -> Tuple[float, bool, int]:
    """A1(κ) = R̄ 의 해 (κ̂, 수렴 여부, 반복 수). R̄ ≥ 1 − 1e-12 이면 상한."""
    if rbar >= 1.0 - 1e-12 or float(bessel_ratio(0.0, KAPPA_CAP)) < rbar:
        return KAPPA_CAP, False, 0
    if rbar <= 1e-12:
        return 0.0, True, 0
    lo, hi = 0.0, KAPPA_CAP
    k = min(max(_kappa_start(rbar), 1e-8), KAPPA_CAP)
    for it in range(1, 101):
        a = float(bessel_ratio(0.0, k))
        f = a - rbar
        if abs(f) < 1e-14:
            return k, True, it
        if f > 0:
            hi = k
        else:
            lo = k
        step = f / (1.0 - a / k - a * a)
        k_new = k - step
        if not (lo < k_new < hi):
            k_new = 0.5 * (lo + hi)
        if abs(k_new - k) <= 1e-13 * max(k, 1.0):
            return k_new, True, it
        k = k_new
    logger.warning(f"Newton for kappa did not settle (R̄={rbar}); falling back to brentq")
    k = optimize.brentq(lambda t: float(bessel_ratio(0.0, t)) - rbar, 1e-12, KAPPA_CAP, xtol=1e-13)
    return k, True, 100


# ── 분포족별 적합 ──────────────────────────────────────────────────


def _fit_normal(x: np.ndarray, family: str) -> FitResult:
    if family == "lognormal":
        if np.any(x <= 0):
            raise DataError("lognormal fit: data must be positive")
        y = np.log(x)
    else:
        y = x
    m = float(np.mean(y))
    sigma = float(np.sqrt(np.mean((y - m) ** 2)))
    if not sigma > 0:
        raise NumericError(f"{family} fit: degenerate sample (zero variance)")
    params = {"m": m, "sigma": sigma}
    return FitResult(family=family, theta_hat=params,
                     log_likelihood=marginal_log_likelihood(family, params, x),
                     converged=True, iterations=0, method="closedForm")


def _fit_gamma(x: np.ndarray) -> FitResult:
    if np.any(x <= 0):
        raise DataError("gamma fit: data must be positive")
    mean = float(np.mean(x))
    s = math.log(mean) - float(np.mean(np.log(x)))
    if not s > 1e-14:
        raise NumericError("gamma fit: degenerate sample (all values equal)")
    p = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    converged, it = False, 0
    for it in range(1, 101):
        f = math.log(p) - special.digamma(p) - s
        fp = 1.0 / p - special.polygamma(1, p)
        p_new = p - f / fp
        if p_new <= 0:
            p_new = p / 2.0
        if abs(p_new - p) <= 1e-12 * p:
            p, converged = p_new, True
            break
        p = p_new
    params = {"a": p / mean, "p": p}
    return FitResult(family="gamma", theta_hat=params,
                     log_likelihood=marginal_log_likelihood("gamma", params, x),
                     converged=converged, iterations=it, method="newton1D")


def _fit_von_mises(x: np.ndarray) -> FitResult:
    mu, rbar = circular_mean(x)
    kappa, converged, it = solve_kappa(rbar)
    if not converged:
        logger.warning(f"von Mises fit: R̄={rbar:.12f} too close to 1, kappa capped at {KAPPA_CAP:g}")
    params = {"mu": mu, "kappa": kappa}
    return FitResult(family="vonMises", theta_hat=params,
                     log_likelihood=marginal_log_likelihood("vonMises", params, x),
                     converged=converged, iterations=it, method="newton1D",
                     notes="" if converged else "kappa capped")


def _logistic(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _logit(p: float) -> float:
    p = min(max(p, 1e-9), 1.0 - 1e-9)
    return math.log(p / (1.0 - p))


# (무제약 벡터 ↔ 모수) 변환
_NM_TRANSFORMS = {
    "cardioid": (
        lambda t: {"mu": float(wrap_angle(t[0])), "rho": 0.5 * math.tanh(t[1])},
        lambda mu, rbar: [mu, math.atanh(min(rbar, 0.49) / 0.5)],
    ),
    "wrappedCauchy": (
        lambda t: {"mu": float(wrap_angle(t[0])), "rho": float(_logistic(t[1]))},
        lambda mu, rbar: [mu, _logit(min(max(rbar, 1e-3), 0.999))],
    ),
    "wrappedNormal": (
        lambda t: {"mu": float(wrap_angle(t[0])), "sigma": math.exp(t[1])},
        lambda mu, rbar: [mu, 0.5 * math.log(-2.0 * math.log(min(max(rbar, 1e-6), 0.999)))],
    ),
}


def _fit_nelder_mead(family: str, x: np.ndarray, rng: np.random.Generator) -> FitResult:
    mu, rbar = circular_mean(x)
    to_params, start_of = _NM_TRANSFORMS[family]
    outcome = nelder_mead(lambda t: -marginal_log_likelihood(family, to_params(t), x),
                          np.array(start_of(mu, rbar)), rng)
    params = to_params(outcome.x)
    ll = marginal_log_likelihood(family, params, x)
    if not outcome.converged:
        logger.warning(f"{family} fit: Nelder–Mead stopped at the evaluation budget")
    return FitResult(family=family, theta_hat=params, log_likelihood=ll,
                     converged=outcome.converged and math.isfinite(ll),
                     iterations=outcome.evaluations, method="nelderMead",
                     start_log_likelihood=-outcome.start_fun)


def _fit_kato(psi: np.ndarray, rng: np.random.Generator) -> FitResult:
    """링크 WC(0, ρ)의 부호 있는 ρ. ρ = tanh(t)."""
    start = math.atanh(float(np.clip(np.mean(np.cos(psi)), -0.95, 0.95)))
    outcome = nelder_mead(lambda t: -marginal_log_likelihood("kato", {"rho": math.tanh(t[0])}, psi),
                          np.array([start]), rng)
    params = {"rho": math.tanh(float(outcome.x[0]))}
    ll = marginal_log_likelihood("kato", params, psi)
    return FitResult(family="kato", theta_hat=params, log_likelihood=ll,
                     converged=outcome.converged and math.isfinite(ll),
                     iterations=outcome.evaluations, method="nelderMead",
                     start_log_likelihood=-outcome.start_fun)


# ── EM ──────────────────────────────────────────────────


def _em_von_mises(x: np.ndarray, rng: np.random.Generator) -> Tuple[Dict[str, float], float, bool, int]:
    mus = rng.choice(x, size=2, replace=False)
    params = {"p1": 0.5, "mu1": float(mus[0]), "kappa1": 1.0, "mu2": float(mus[1]), "kappa2": 1.0}
    prev = -math.inf
    C, S = np.cos(x), np.sin(x)
    for it in range(1, EM_MAX_ITER + 1):
        d1 = params["p1"] * circular_pdf("vonMises", {"mu": params["mu1"], "kappa": params["kappa1"]}, x)
        d2 = (1 - params["p1"]) * circular_pdf("vonMises", {"mu": params["mu2"], "kappa": params["kappa2"]}, x)
        total = d1 + d2
        ll = float(np.sum(np.log(total)))
        if abs(ll - prev) < EM_TOL:
            return params, ll, True, it
        prev = ll
        r1 = d1 / total
        new = {"p1": float(np.mean(r1))}
        for k, r in (("1", r1), ("2", 1.0 - r1)):
            w = float(np.sum(r))
            if w < 1e-10:
                return params, ll, False, it
            c, s = float(np.dot(r, C)) / w, float(np.dot(r, S)) / w
            new["mu" + k] = float(wrap_angle(math.atan2(s, c)))
            new["kappa" + k] = solve_kappa(math.hypot(c, s))[0]
        params = {key: new[key] for key in ("p1", "mu1", "kappa1", "mu2", "kappa2")}
    return params, prev, False, EM_MAX_ITER


def _em_normal(x: np.ndarray, rng: np.random.Generator) -> Tuple[Dict[str, float], float, bool, int]:
    ms = rng.choice(x, size=2, replace=False)
    sd = float(np.std(x))
    floor = 1e-6 * sd
    params = {"p1": 0.5, "m1": float(ms[0]), "sigma1": sd, "m2": float(ms[1]), "sigma2": sd}
    prev = -math.inf
    for it in range(1, EM_MAX_ITER + 1):
        d1 = params["p1"] * stats.norm.pdf(x, params["m1"], params["sigma1"])
        d2 = (1 - params["p1"]) * stats.norm.pdf(x, params["m2"], params["sigma2"])
        total = d1 + d2
        with np.errstate(divide="ignore"):
            ll = float(np.sum(np.log(total)))
        if not math.isfinite(ll):
            return params, -math.inf, False, it
        if abs(ll - prev) < EM_TOL:
            return params, ll, True, it
        prev = ll
        r1 = d1 / total
        new = {"p1": float(np.mean(r1))}
        for k, r in (("1", r1), ("2", 1.0 - r1)):
            w = float(np.sum(r))
            if w < 1e-10:
                return params, ll, False, it
            m = float(np.dot(r, x)) / w
            new["m" + k] = m
            new["sigma" + k] = max(math.sqrt(float(np.dot(r, (x - m) ** 2)) / w), floor)
        params = {key: new[key] for key in ("p1", "m1", "sigma1", "m2", "sigma2")}
    return params, prev, False, EM_MAX_ITER


def _fit_mixture(family: str, x: np.ndarray, rng: np.random.Generator) -> FitResult:
    if x.size < 4:
        raise DataError(f"insufficient data: {family} fit needs n >= 4, got {x.size}")
    run = _em_von_mises if family == "vmMixture" else _em_normal
    best = None
    iterations = 0
    for restart in range(EM_RESTARTS):
        params, ll, converged, it = run(x, rng)
        iterations += it
        if best is None or ll > best[1]:
            best = (params, ll, converged, restart)
    params, ll, converged, _ = best
    params = dict(params)
    if not converged:
        logger.warning(f"{family} EM did not reach tolerance {EM_TOL:g} in {EM_MAX_ITER} iterations")
    ll = marginal_log_likelihood(family, params, x)
    return FitResult(family=family, theta_hat=params, log_likelihood=ll,
                     converged=converged and math.isfinite(ll), iterations=iterations, method="em")


# ── 진입점 ──────────────────────────────────────────────────


def fit_marginal(family: str, data, rng: Optional[np.random.Generator] = None) -> FitResult:
    """주변 분포족의 최대우도 적합. 원형 자료는 [0, 2π)로 감는다."""
    if family not in MARGINAL_FAMILIES:
        raise UsageError(f"unknown marginal family {family!r}")
    if rng is None:
        rng = make_stream(0, "fit_marginal", family)
    x = _check_data(family, data)
    if family in CIRCULAR_FAMILIES or family == "kato":
        x = wrap_angle(x)
    if family == "uniform":
        return FitResult(family=family, theta_hat={}, log_likelihood=-x.size * math.log(TWO_PI),
                         converged=True, iterations=0, method="closedForm")
    if family in ("normal", "lognormal"):
        return _fit_normal(x, family)
    if family == "gamma":
        return _fit_gamma(x)
    if family == "vonMises":
        return _fit_von_mises(x)
    if family == "kato":
        return _fit_kato(x, rng)
    if family in _NM_TRANSFORMS:
        return _fit_nelder_mead(family, x, rng)
    return _fit_mixture(family, x, rng)
