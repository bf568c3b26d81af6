"""몬테카를로 실험 설정과 결과 행."""

import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from models.errors import UsageError
from models.results import BANDWIDTH_RULES

EXPERIMENTS = ("sizePower", "bandwidthGrid", "cltConvergence", "constants", "analyze")
CLT_STATISTICS = ("independence", "ise")


@dataclass
class ExperimentConfig:
    """시뮬레이션 실험 설정.

    기본값은 데스크 규모(M=B=200). 전체 규모는 M=B=1000, n_list=100,500,1000.
    """
    experiment: str = "sizePower"
    models: List[str] = field(default_factory=lambda: ["CL1"])
    n_list: List[int] = field(default_factory=lambda: [100])
    delta_list: List[float] = field(default_factory=lambda: [0.0])
    alpha_list: List[float] = field(default_factory=lambda: [0.10, 0.05, 0.01])
    M: int = 200
    B: int = 200
    bandwidth_rule: str = "LCV"
    bandwidths: Optional[Tuple[float, float]] = None   # bandwidth_rule=fixed
    bw_grid_size: int = 0                              # bandwidthGrid는 >= 2, analyze는 >0 이면 p-값 곡면
    bw_grid_h: Tuple[float, float] = (0.1, 1.5)
    bw_grid_g: Tuple[float, float] = (0.1, 1.5)
    grid_circle: int = 128
    grid_line: int = 96
    grid_torus: int = 96
    truncation: float = 7.0
    master_seed: int = 20131
    threads: int = 4
    out_dir: str = "output"
    clt_n: int = 1000
    clt_statistic: str = "independence"
    clt_grid: int = 256
    median_lcv_draws: int = 50
    reselect_bandwidths: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"experiment: unknown value {self.experiment!r}")
        if self.M < 1:
            raise UsageError(f"M: must be >= 1, got {self.M}")
        if self.B < 1:
            raise UsageError(f"B: must be >= 1, got {self.B}")
        if not self.models:
            raise UsageError("models: at least one model id is required")
        if any(n < 3 for n in self.n_list):
            raise UsageError(f"n_list: sample sizes must be >= 3, got {self.n_list}")
        if any(not (0.0 <= d <= 1.0) for d in self.delta_list):
            raise UsageError(f"delta_list: deviations must lie in [0, 1], got {self.delta_list}")
        if any(not (0.0 < a < 1.0) for a in self.alpha_list):
            raise UsageError(f"alpha_list: levels must lie in (0, 1), got {self.alpha_list}")
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise UsageError(f"bandwidth_rule: unknown value {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed" and self.bandwidths is None:
            raise UsageError("bandwidths: required when bandwidth_rule=fixed")
        for key in ("grid_circle", "grid_line", "grid_torus", "clt_grid"):
            if getattr(self, key) < 8:
                raise UsageError(f"{key}: at least 8 nodes required")
        if self.truncation <= 0:
            raise UsageError("truncation: must be positive")
        if self.threads < 1:
            raise UsageError("threads: must be >= 1")
        if self.bw_grid_size < 0:
            raise UsageError("bw_grid_size: must be >= 0")
        if self.clt_statistic not in CLT_STATISTICS:
            raise UsageError(f"clt_statistic: unknown value {self.clt_statistic!r}")
        if self.median_lcv_draws < 1:
            raise UsageError("median_lcv_draws: must be >= 1")

    def to_kv_text(self) -> str:
        """설정 파일 형식(key=value)으로 직렬화"""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, (list, tuple)):
                value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv_map(cls, values: Dict[str, str]) -> 'ExperimentConfig':
        """to_kv_text 출력(또는 설정 파일) 역파싱"""
        return cls(**parse_config_values(values))


@dataclass
class ResultRow:
    """크기/검정력 표의 한 행 (model, n, δ, α)"""
    model_id: str
    n: int
    delta: float
    alpha: float
    rejection_rate: float
    mc_se: float
    elapsed: float
    seed: int
    M: int = 0
    B: int = 0
    bandwidth_rule: str = "LCV"
    flagged: bool = False
    n_failed: int = 0

    # elapsed는 재현 가능한 CSV에서 제외 (별도 timing 파일)
    CSV_COLUMNS = [
        "model_id", "n", "delta", "alpha", "rejection_rate", "mc_se",
        "seed", "M", "B", "bandwidth_rule", "flagged", "n_failed",
    ]

    def __post_init__(self):
        # 모든 반복이 실패한 시나리오는 nan
        if not math.isnan(self.rejection_rate) and not (0.0 <= self.rejection_rate <= 1.0):
            raise ValueError(f"rejection_rate {self.rejection_rate} outside [0, 1]")

    @staticmethod
    def monte_carlo_se(rate: float, M: int) -> float:
        return math.sqrt(rate * (1.0 - rate) / M)

    @classmethod
    def from_rejections(cls, model_id: str, n: int, delta: float, alpha: float,
                        rejections: int, M: int, **kwargs) -> 'ResultRow':
        rate = rejections / M
        return cls(model_id=model_id, n=n, delta=delta, alpha=alpha,
                   rejection_rate=rate, mc_se=cls.monte_carlo_se(rate, M), M=M, **kwargs)

    def to_csv_row(self) -> dict:
        return {c: getattr(self, c) for c in self.CSV_COLUMNS}

    @classmethod
    def from_csv_row(cls, d: dict) -> 'ResultRow':
        return cls(
            model_id=str(d["model_id"]),
            n=int(d["n"]),
            delta=float(d["delta"]),
            alpha=float(d["alpha"]),
            rejection_rate=float(d["rejection_rate"]),
            mc_se=float(d["mc_se"]),
            elapsed=float(d.get("elapsed", 0.0)),
            seed=int(d["seed"]),
            M=int(d.get("M", 0)),
            B=int(d.get("B", 0)),
            bandwidth_rule=str(d.get("bandwidth_rule", "LCV")),
            flagged=str(d.get("flagged", False)).lower() == "true",
            n_failed=int(d.get("n_failed", 0)),
        )


# ── key=value 파싱 ──────────────────────────────────────────────────


def _split(text: str) -> List[str]:
    return [p.strip() for p in str(text).split(",") if p.strip()]


def _pair(text: str) -> Tuple[float, float]:
    parts = [float(p) for p in _split(text)]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return parts[0], parts[1]


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_PARSERS = {
    "experiment": str,
    "models": _split,
    "n_list": lambda t: [int(v) for v in _split(t)],
    "delta_list": lambda t: [float(v) for v in _split(t)],
    "alpha_list": lambda t: [float(v) for v in _split(t)],
    "M": int,
    "B": int,
    "bandwidth_rule": str,
    "bandwidths": _pair,
    "bw_grid_size": int,
    "bw_grid_h": _pair,
    "bw_grid_g": _pair,
    "grid_circle": int,
    "grid_line": int,
    "grid_torus": int,
    "truncation": float,
    "master_seed": int,
    "threads": int,
    "out_dir": str,
    "clt_n": int,
    "clt_statistic": str,
    "clt_grid": int,
    "median_lcv_draws": int,
    "reselect_bandwidths": _bool,
}

CONFIG_KEYS = tuple(_PARSERS)


def parse_config_values(values: Dict[str, str]) -> Dict[str, object]:
    """문자열 key=value → ExperimentConfig 필드 값. 잘못된 키/값은 UsageError."""
    parsed = {}
    for key, text in values.items():
        if key not in _PARSERS:
            raise UsageError(f"{key}: unknown configuration key")
        if text is None or str(text).strip() == "":
            continue
        try:
            parsed[key] = _PARSERS[key](str(text).strip())
        except ValueError as e:
            raise UsageError(f"{key}: invalid value {text!r} ({e})")
    return parsed
