"""CSV 표본 입력.

열 구성:
  theta, z         원×직선
  theta, psi       토러스
  x1, x2, x3, z    구면×직선
머리글 행은 자동 감지한다. 머리글이 없으면 support 인자(기본 원×직선)를 따른다.
"""

import logging
import math
import os
from typing import List, Optional

import numpy as np
import pandas as pd

from models.errors import DataError, UsageError
from models.sample import (
    SUPPORT_CIRCLE_CIRCLE,
    SUPPORT_CIRCLE_LINE,
    SUPPORT_SPHERE_LINE,
    DirDirSample,
    DirLinSample,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
UNIT_RENORM_TOL = 1e-6

_COLUMNS = {
    SUPPORT_CIRCLE_LINE: ["theta", "z"],
    SUPPORT_CIRCLE_CIRCLE: ["theta", "psi"],
    SUPPORT_SPHERE_LINE: ["x1", "x2", "x3", "z"],
}


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


def _detect_header(first_row: List[str]) -> bool:
    """첫 행에 숫자가 아닌 필드가 있으면 머리글"""
    return not all(_is_number(v) for v in first_row)


def _support_from_header(header: List[str]) -> str:
    names = [h.strip().lower() for h in header]
    if "psi" in names:
        return SUPPORT_CIRCLE_CIRCLE
    if {"x1", "x2", "x3"} <= set(names):
        return SUPPORT_SPHERE_LINE
    if "theta" in names and "z" in names:
        return SUPPORT_CIRCLE_LINE
    raise DataError(f"unrecognized CSV header {header}; expected theta,z or theta,psi or x1,x2,x3,z")


def _wrap(values: np.ndarray, name: str) -> np.ndarray:
    outside = (values < 0) | (values >= TWO_PI)
    if np.any(outside):
        logger.warning(f"{int(np.count_nonzero(outside))} {name} values outside [0, 2π) wrapped")
        values = np.mod(values, TWO_PI)
    return values


def _numeric_table(raw: pd.DataFrame, first_line: int) -> np.ndarray:
    """문자열 표를 실수 배열로. 실패하면 원본 파일 줄 번호를 담아 DataError."""
    numeric = raw.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        fields = ",".join("" if pd.isna(v) else str(v) for v in raw.iloc[row])
        raise DataError(f"line {first_line + row}: malformed row {fields!r} (expected finite numbers)")
    return numeric.to_numpy(dtype=float)


def read_sample(path: str, support: Optional[str] = None, degrees: bool = False):
    """CSV 파일 → DirLinSample 또는 DirDirSample.

    support가 주어지면 파일의 머리글과 일치해야 한다.
    degrees=True 이면 각도 열을 도 단위로 읽어 라디안으로 바꾼다.
    """
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"{path}: cannot parse CSV ({e})")
    if raw.empty:
        raise DataError(f"{path}: no rows")

    first_line = 1
    has_header = _detect_header(list(raw.iloc[0]))
    if has_header:
        header = [str(h).strip().lower() for h in raw.iloc[0]]
        detected = _support_from_header(header)
        if support is not None and support != detected:
            raise DataError(f"support mismatch: {path} holds {detected} data, expected {support}")
        support = detected
        raw = raw.iloc[1:].reset_index(drop=True)
        raw.columns = header
        raw = raw[_COLUMNS[support]]
        first_line = 2
    else:
        support = support or SUPPORT_CIRCLE_LINE
        expected = len(_COLUMNS[support])
        if raw.shape[1] != expected:
            raise DataError(f"{path}: {raw.shape[1]} columns, {support} data needs {expected}")
    if raw.empty:
        raise DataError(f"{path}: header only, no observations")

    values = _numeric_table(raw, first_line)
    if support == SUPPORT_SPHERE_LINE:
        x = values[:, :3]
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0):
            raise DataError(f"line {first_line + int(np.flatnonzero(norms == 0)[0])}: zero direction vector")
        if np.any(np.abs(norms - 1.0) > UNIT_RENORM_TOL):
            logger.warning("direction vectors are not unit-norm; normalizing")
        sample = DirLinSample(x=x / norms[:, None], z=values[:, 3])
    else:
        theta = values[:, 0]
        second = values[:, 1]
        if degrees:
            theta = np.deg2rad(theta)
            if support == SUPPORT_CIRCLE_CIRCLE:
                second = np.deg2rad(second)
        theta = _wrap(theta, "theta")
        if support == SUPPORT_CIRCLE_CIRCLE:
            sample = DirDirSample.from_angles(theta, _wrap(second, "psi"))
        else:
            sample = DirLinSample.from_angles(theta, second)
    logger.info(f"read {sample.n} {support} observations from {path}")
    return sample


def require_support(sample, support: str) -> None:
    if sample.support != support:
        raise DataError(f"support mismatch: sample is {sample.support}, expected {support}")


def parse_support(text: Optional[str]) -> Optional[str]:
    if text is None:
        return None
    aliases = {
        "cl": SUPPORT_CIRCLE_LINE, "circleline": SUPPORT_CIRCLE_LINE,
        "cc": SUPPORT_CIRCLE_CIRCLE, "circlecircle": SUPPORT_CIRCLE_CIRCLE, "torus": SUPPORT_CIRCLE_CIRCLE,
        "sl": SUPPORT_SPHERE_LINE, "sphereline": SUPPORT_SPHERE_LINE,
    }
    key = text.replace("-", "").replace("_", "").lower()
    if key not in aliases:
        raise UsageError(f"unknown support {text!r}")
    return aliases[key]
