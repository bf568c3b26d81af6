"""적합 결과, 검정 보고서, 점근 상수 데이터 모델."""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from models.errors import NumericError
from models.sample import Bandwidths

FIT_METHODS = ("closedForm", "newton1D", "nelderMead", "twoStep", "em")
TEST_METHODS = ("bootstrap", "permutation", "asymptotic")
BANDWIDTH_RULES = ("fixed", "LCV", "medianLCV")


def _fmt(value) -> str:
    """key=value 텍스트용 값 포맷 (실수는 17자리)"""
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


@dataclass
class FitResult:
    """최대우도 적합 결과.

    theta_hat은 JointModel.theta와 같은 이름-순서 레이아웃을 갖는다.
    """
    family: str
    theta_hat: Dict[str, float]
    log_likelihood: float
    converged: bool
    iterations: int
    method: str                                   # FIT_METHODS
    start_log_likelihood: Optional[float] = None  # 시작점(적률 추정) 로그우도
    notes: str = ""

    def __post_init__(self):
        if self.method not in FIT_METHODS:
            raise ValueError(f"unknown fit method {self.method!r}")
        if self.converged and not math.isfinite(self.log_likelihood):
            raise NumericError(f"{self.family}: converged fit has non-finite log-likelihood")

    @property
    def theta_vector(self) -> np.ndarray:
        return np.array(list(self.theta_hat.values()), dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "theta_hat": dict(self.theta_hat),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
            "start_log_likelihood": self.start_log_likelihood,
            "notes": self.notes,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> 'FitResult':
        return cls(
            family=d.get("family", ""),
            theta_hat={k: float(v) for k, v in d.get("theta_hat", {}).items()},
            log_likelihood=float(d.get("log_likelihood", float("nan"))),
            converged=bool(d.get("converged", False)),
            iterations=int(d.get("iterations", 0)),
            method=d.get("method", "closedForm"),
            start_log_likelihood=d.get("start_log_likelihood"),
            notes=d.get("notes", ""),
        )

    def to_kv_text(self) -> str:
        lines = [
            f"family={self.family}",
            f"method={self.method}",
            f"converged={self.converged}",
            f"iterations={self.iterations}",
            f"log_likelihood={_fmt(self.log_likelihood)}",
        ]
        lines += [f"theta.{k}={_fmt(v)}" for k, v in self.theta_hat.items()]
        if self.notes:
            lines.append(f"notes={self.notes}")
        return "\n".join(lines)


@dataclass
class AsymptoticConstants:
    """독립성 검정 통계량의 중심화/척도 상수"""
    A_n: float
    sigma_I_sq: float
    n: int
    h: float
    g: float                  # 방향-방향이면 h2
    q: int
    q2: Optional[int] = None  # 방향-방향 두 번째 차원
    phi: Optional[float] = None

    def __post_init__(self):
        if not (self.sigma_I_sq > 0) or not math.isfinite(self.A_n):
            raise NumericError(f"invalid asymptotic constants A_n={self.A_n}, sigma_I_sq={self.sigma_I_sq}")

    @property
    def scale_factor(self) -> float:
        """n·(h^q g)^{1/2} (방향-방향이면 n·(h1^q1 h2^q2)^{1/2})"""
        if self.q2 is None:
            return self.n * math.sqrt(self.h ** self.q * self.g)
        return self.n * math.sqrt(self.h ** self.q * self.g ** self.q2)

    def standardize(self, statistic: float) -> float:
        return self.scale_factor * (statistic - self.A_n) / math.sqrt(2.0 * self.sigma_I_sq)

    def to_json_dict(self) -> dict:
        return {
            "A_n": self.A_n, "sigma_I_sq": self.sigma_I_sq, "n": self.n,
            "h": self.h, "g": self.g, "q": self.q, "q2": self.q2, "phi": self.phi,
        }


@dataclass
class TestReport:
    """검정 결과 보고서 (통계량, 보정 방법, p-값, 재현 정보)"""
    __test__ = False  # pytest 수집 대상 아님

    statistic_name: str          # "T_n" | "R_n"
    statistic: float
    p_value: float
    method: str                  # TEST_METHODS
    B: int
    bandwidths: Bandwidths
    bandwidth_rule: str          # BANDWIDTH_RULES
    seed: Optional[int]
    fit: Optional[FitResult] = None
    elapsed: float = 0.0
    model_id: str = ""
    n: int = 0
    grid: str = ""
    flagged: bool = False
    n_failed: int = 0
    replicates: List[float] = field(default_factory=list, repr=False)
    extras: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in TEST_METHODS:
            raise ValueError(f"unknown calibration method {self.method!r}")
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if not (0.0 <= self.p_value <= 1.0):
            raise NumericError(f"p-value {self.p_value} outside [0, 1]")
        if self.statistic < 0:
            raise NumericError(f"{self.statistic_name}={self.statistic} is negative")

    def rejects(self, alpha: float) -> bool:
        return self.p_value < alpha

    CSV_COLUMNS = [
        "statistic_name", "statistic", "p_value", "method", "B", "h", "second_bw",
        "bandwidth_rule", "seed", "model_id", "n", "grid", "flagged", "n_failed",
    ]

    def to_csv_row(self) -> dict:
        return {
            "statistic_name": self.statistic_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "method": self.method,
            "B": self.B,
            "h": self.bandwidths.h,
            "second_bw": self.bandwidths.second,
            "bandwidth_rule": self.bandwidth_rule,
            "seed": self.seed,
            "model_id": self.model_id,
            "n": self.n,
            "grid": self.grid,
            "flagged": self.flagged,
            "n_failed": self.n_failed,
        }

    def to_kv_text(self) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in self.to_csv_row().items()]
        lines.append(f"elapsed={self.elapsed:.3f}")
        lines += [f"extra.{k}={_fmt(v)}" for k, v in self.extras.items()]
        if self.fit is not None:
            lines += [f"fit.{line}" for line in self.fit.to_kv_text().splitlines()]
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        d = self.to_csv_row()
        d["bandwidths"] = self.bandwidths.to_json_dict()
        d["elapsed"] = self.elapsed
        d["extras"] = dict(self.extras)
        d["fit"] = self.fit.to_json_dict() if self.fit else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)
