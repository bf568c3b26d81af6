"""실험 설정 로딩.

우선순위: 기본값 < 설정 파일(key=value) < DIRLINLAB_* 환경 변수 < CLI 플래그.
"""

import logging
import os
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

from models.errors import UsageError
from models.experiment import CONFIG_KEYS, ExperimentConfig, parse_config_values
from services.model_catalog import CATALOG_IDS

logger = logging.getLogger(__name__)

ENV_PREFIX = "DIRLINLAB_"


def read_config_file(path: str) -> Dict[str, str]:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    values = {k: v for k, v in dotenv_values(path).items() if v is not None}
    logger.debug(f"config file {path}: {sorted(values)}")
    return values


def env_overrides() -> Dict[str, str]:
    """DIRLINLAB_<KEY> 환경 변수 (.env 포함). 키는 대소문자 무시."""
    load_dotenv()
    lookup = {k.lower(): k for k in CONFIG_KEYS}
    values = {}
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = lookup.get(name[len(ENV_PREFIX):].lower())
        if key is not None:
            values[key] = value
    return values


def check_models(config: ExperimentConfig) -> None:
    unknown = [m for m in config.models if m not in CATALOG_IDS]
    if unknown:
        raise UsageError(f"models: unknown catalog ids {unknown}")


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None,
                use_env: bool = True) -> ExperimentConfig:
    """설정 파일, 환경 변수, CLI 값(이미 파싱된 값 또는 문자열)을 합쳐 검증된 설정 생성"""
    values: Dict[str, object] = {}
    if path:
        values.update(parse_config_values(read_config_file(path)))
    if use_env:
        values.update(parse_config_values(env_overrides()))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise UsageError(f"{key}: unknown configuration key")
        if isinstance(value, str):
            value = parse_config_values({key: value}).get(key)
            if value is None:
                continue
        values[key] = value
    config = ExperimentConfig(**values)
    check_models(config)
    return config


def write_resolved_config(config: ExperimentConfig, path: str) -> str:
    """실험 출력 옆에 확정된 설정을 남긴다"""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(config.to_kv_text())
    return path
