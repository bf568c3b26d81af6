"""재표본 보정 공통 부분: 경험적 p-값과 반복 실행기.

반복마다 부모 스트림에서 뽑은 자식 시드로 독립 생성기를 만들고,
스레드 풀에서 실행한 뒤 인덱스 순서로 결과를 모은다 (스레드 수와 무관하게 같은 결과).
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from models.errors import DirLinError, NumericError
from services.rng_streams import child_seeds, stream_from_seed

logger = logging.getLogger(__name__)

T = TypeVar("T")

FAILURE_FLAG_FRACTION = 0.10

# 반복을 버리는 실패. 그 밖의 예외는 호출자에게 전파된다.
REPLICATE_FAILURES = (DirLinError, np.linalg.LinAlgError, FloatingPointError)


def empirical_p_value(statistic: float, replicates: Sequence[float]) -> float:
    """#{statistic ≤ R*_b} / B"""
    values = np.asarray(replicates, dtype=float)
    if values.size == 0:
        raise NumericError("no valid replicates to calibrate the statistic")
    return float(np.count_nonzero(statistic <= values)) / values.size


def run_replicates(task: Callable[[int, np.random.Generator], T], B: int, rng: np.random.Generator,
                   threads: int = 1, label: str = "replicate",
                   progress_callback: Optional[Callable] = None) -> List[Optional[T]]:
    """task(b, rng_b)를 B번 실행. REPLICATE_FAILURES로 실패한 반복은 None으로 남긴다."""
    seeds = child_seeds(rng, B)
    return run_keyed(task, B, lambda b: stream_from_seed(seeds[b]), threads, label, progress_callback)


def run_keyed(task: Callable[[int, np.random.Generator], T], count: int,
              stream_for: Callable[[int], np.random.Generator], threads: int = 1,
              label: str = "replicate", progress_callback: Optional[Callable] = None) -> List[Optional[T]]:
    """반복 b의 생성기를 stream_for(b)로 만드는 실행기 (몬테카를로 반복용)"""
    results: List[Optional[T]] = [None] * count

    def _notify(event: str, data: dict):
        if progress_callback:
            progress_callback(event, data)

    def _run(b: int):
        try:
            return b, task(b, stream_for(b))
        except REPLICATE_FAILURES as e:
            logger.warning(f"{label} {b} failed: {e}")
            return b, None

    if threads <= 1:
        for b in range(count):
            _, results[b] = _run(b)
            _notify("replicate_done", {"label": label, "index": b, "total": count})
        return results

    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(_run, b): b for b in range(count)}
        done = 0
        for future in as_completed(futures):
            b, value = future.result()
            results[b] = value
            done += 1
            _notify("replicate_done", {"label": label, "index": b, "done": done, "total": count})
    return results


def failure_flag(n_failed: int, B: int, label: str) -> bool:
    """실패 비율이 10%를 넘으면 경고하고 True"""
    if B and n_failed / B > FAILURE_FLAG_FRACTION:
        logger.warning(f"{label}: {n_failed} of {B} replicates failed; report flagged")
        return True
    return False
