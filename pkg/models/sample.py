"""방향-선형 / 방향-방향 표본 데이터 모델.

관측치는 단위 구면 위의 벡터 x와 실수 z(또는 두 번째 단위 벡터 y)의 쌍이다.
표본은 numpy 배열로 보관하며 생성 이후 변경하지 않는다.
"""

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.errors import DataError, UsageError

# ── 지지집합 ──────────────────────────────────────────────────

SUPPORT_CIRCLE_LINE = "CircleLine"
SUPPORT_SPHERE_LINE = "SphereLine"
SUPPORT_CIRCLE_CIRCLE = "CircleCircle"
SUPPORTS = (SUPPORT_CIRCLE_LINE, SUPPORT_SPHERE_LINE, SUPPORT_CIRCLE_CIRCLE)

UNIT_NORM_TOL = 1e-12
BANDWIDTH_FLOOR = 0.01  # κ = 1/h² ≤ 10⁴


def angles_to_unit(theta) -> np.ndarray:
    """각도(라디안) 배열 → (n, 2) 단위 벡터"""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def unit_to_angles(x: np.ndarray) -> np.ndarray:
    """(n, 2) 단위 벡터 → [0, 2π) 각도"""
    x = np.asarray(x, dtype=float)
    return np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)


def _check_unit(x: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(x, axis=-1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{name}[{i}] is not unit-norm (|x|={norms[i]!r})")


def _sphere_dim(support: str) -> int:
    return 2 if support == SUPPORT_SPHERE_LINE else 1


# ── 단일 관측치 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class DirLinObservation:
    """방향-선형 관측치 (X_i, Z_i)"""
    x: Tuple[float, ...]   # Ω_q 위의 단위 벡터
    z: float

    def __post_init__(self):
        _check_unit(np.asarray(self.x, dtype=float)[None, :], "x")
        if not np.isfinite(self.z):
            raise DataError(f"z must be finite, got {self.z!r}")


@dataclass(frozen=True)
class DirDirObservation:
    """방향-방향 관측치 (X_i, Y_i)"""
    x: Tuple[float, ...]
    y: Tuple[float, ...]

    def __post_init__(self):
        _check_unit(np.asarray(self.x, dtype=float)[None, :], "x")
        _check_unit(np.asarray(self.y, dtype=float)[None, :], "y")


# ── 표본 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class DirLinSample:
    """방향-선형 표본. x는 (n, q+1), z는 (n,)"""
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if x.shape[0] != z.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but z has {z.shape[0]}")
        if x.shape[1] < 2:
            raise DataError("directional component needs at least 2 coordinates")
        _check_unit(x, "x")
        if not np.all(np.isfinite(z)):
            raise DataError("z contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def q(self) -> int:
        return int(self.x.shape[1] - 1)

    @property
    def support(self) -> str:
        if self.q == 1:
            return SUPPORT_CIRCLE_LINE
        if self.q == 2:
            return SUPPORT_SPHERE_LINE
        return f"S{self.q}Line"

    @property
    def theta(self) -> np.ndarray:
        if self.q != 1:
            raise DataError("angles are only defined for circular samples")
        return unit_to_angles(self.x)

    @property
    def second(self) -> np.ndarray:
        return self.z

    @classmethod
    def from_angles(cls, theta, z) -> 'DirLinSample':
        return cls(x=angles_to_unit(theta), z=np.asarray(z, dtype=float))

    @classmethod
    def from_observations(cls, obs: Sequence[DirLinObservation]) -> 'DirLinSample':
        if not obs:
            raise DataError("empty sample")
        return cls(x=np.array([o.x for o in obs], dtype=float),
                   z=np.array([o.z for o in obs], dtype=float))

    def observations(self) -> List[DirLinObservation]:
        return [DirLinObservation(tuple(xi), float(zi)) for xi, zi in zip(self.x, self.z)]

    def with_second(self, z: np.ndarray) -> 'DirLinSample':
        return DirLinSample(x=self.x, z=z)

    def take(self, idx) -> 'DirLinSample':
        return DirLinSample(x=self.x[idx], z=self.z[idx])

    def rotated(self, rotation: np.ndarray) -> 'DirLinSample':
        """방향 성분에 회전 행렬 적용 (재정규화 포함)"""
        x = self.x @ np.asarray(rotation, dtype=float).T
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return DirLinSample(x=x, z=self.z)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x).tobytes())
        h.update(np.ascontiguousarray(self.z).tobytes())
        return h.hexdigest()[:16]

    def to_frame(self) -> pd.DataFrame:
        if self.q == 1:
            return pd.DataFrame({"theta": self.theta, "z": self.z})
        cols = {f"x{j}": self.x[:, j] for j in range(self.q + 1)}
        cols["z"] = self.z
        return pd.DataFrame(cols)


@dataclass(frozen=True)
class DirDirSample:
    """방향-방향 표본. x는 (n, q1+1), y는 (n, q2+1)"""
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if x.shape[0] != y.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        _check_unit(x, "x")
        _check_unit(y, "y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def q(self) -> int:
        return int(self.x.shape[1] - 1)

    @property
    def q2(self) -> int:
        return int(self.y.shape[1] - 1)

    @property
    def support(self) -> str:
        if self.q == 1 and self.q2 == 1:
            return SUPPORT_CIRCLE_CIRCLE
        return f"S{self.q}S{self.q2}"

    @property
    def theta(self) -> np.ndarray:
        return unit_to_angles(self.x)

    @property
    def psi(self) -> np.ndarray:
        return unit_to_angles(self.y)

    @property
    def second(self) -> np.ndarray:
        return self.y

    @classmethod
    def from_angles(cls, theta, psi) -> 'DirDirSample':
        return cls(x=angles_to_unit(theta), y=angles_to_unit(psi))

    @classmethod
    def from_observations(cls, obs: Sequence[DirDirObservation]) -> 'DirDirSample':
        if not obs:
            raise DataError("empty sample")
        return cls(x=np.array([o.x for o in obs], dtype=float),
                   y=np.array([o.y for o in obs], dtype=float))

    def observations(self) -> List[DirDirObservation]:
        return [DirDirObservation(tuple(xi), tuple(yi)) for xi, yi in zip(self.x, self.y)]

    def with_second(self, y: np.ndarray) -> 'DirDirSample':
        return DirDirSample(x=self.x, y=y)

    def take(self, idx) -> 'DirDirSample':
        return DirDirSample(x=self.x[idx], y=self.y[idx])

    def rotated(self, rotation: np.ndarray, rotation2: Optional[np.ndarray] = None) -> 'DirDirSample':
        r1 = np.asarray(rotation, dtype=float)
        r2 = r1 if rotation2 is None else np.asarray(rotation2, dtype=float)
        x = self.x @ r1.T
        y = self.y @ r2.T
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        return DirDirSample(x=x, y=y)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()[:16]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"theta": self.theta, "psi": self.psi})


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


# ── 대역폭 ──────────────────────────────────────────────────


@dataclass(frozen=True)
class Bandwidths:
    """방향-선형 (h, g) 또는 방향-방향 (h1, h2) 대역폭.

    방향 성분 대역폭은 BANDWIDTH_FLOOR 이상이어야 한다.
    """
    h: float
    g: Optional[float] = None     # 선형 성분
    h2: Optional[float] = None    # 두 번째 방향 성분
    boundary_hit: bool = False    # LCV 탐색 상자 경계에서 멈춘 경우

    def __post_init__(self):
        if (self.g is None) == (self.h2 is None):
            raise UsageError("exactly one of g (linear) or h2 (directional) must be set")
        for name, value in (("h", self.h), ("h2", self.h2)):
            if value is None:
                continue
            if not np.isfinite(value) or value < BANDWIDTH_FLOOR:
                raise UsageError(f"bandwidth {name}={value!r} below floor {BANDWIDTH_FLOOR}")
        if self.g is not None and (not np.isfinite(self.g) or self.g <= 0):
            raise UsageError(f"bandwidth g={self.g!r} must be positive")
        object.__setattr__(self, "h", float(self.h))
        if self.g is not None:
            object.__setattr__(self, "g", float(self.g))
        if self.h2 is not None:
            object.__setattr__(self, "h2", float(self.h2))

    @classmethod
    def dirlin(cls, h: float, g: float, boundary_hit: bool = False) -> 'Bandwidths':
        return cls(h=h, g=g, boundary_hit=boundary_hit)

    @classmethod
    def dirdir(cls, h1: float, h2: float, boundary_hit: bool = False) -> 'Bandwidths':
        return cls(h=h1, h2=h2, boundary_hit=boundary_hit)

    @property
    def is_dirdir(self) -> bool:
        return self.h2 is not None

    @property
    def second(self) -> float:
        """두 번째 성분 대역폭 (g 또는 h2)"""
        return self.h2 if self.is_dirdir else self.g

    def as_tuple(self) -> Tuple[float, float]:
        return (self.h, self.second)

    def label(self) -> str:
        if self.is_dirdir:
            return f"h1={self.h:.4g}, h2={self.h2:.4g}"
        return f"h={self.h:.4g}, g={self.g:.4g}"

    def to_json_dict(self) -> dict:
        d = {"h": self.h, "boundary_hit": self.boundary_hit}
        if self.is_dirdir:
            d["h2"] = self.h2
        else:
            d["g"] = self.g
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> 'Bandwidths':
        return cls(h=d["h"], g=d.get("g"), h2=d.get("h2"),
                   boundary_hit=d.get("boundary_hit", False))

    @classmethod
    def parse(cls, text: str, dirdir: bool = False) -> 'Bandwidths':
        """"h,g" 형식 문자열 파싱"""
        parts = [p.strip() for p in str(text).split(",") if p.strip()]
        if len(parts) != 2:
            raise UsageError(f"bandwidths must be 'h,g', got {text!r}")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise UsageError(f"bandwidths must be numeric, got {text!r}")
        return cls.dirdir(a, b) if dirdir else cls.dirlin(a, b)
