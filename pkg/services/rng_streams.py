"""재현 가능한 분할 난수 스트림.

Philox(카운터 기반) 비트 생성기를 SeedSequence로 초기화한다.
스트림 키 (실험, 모델, n, δ, 반복 번호 …)는 blake2b 해시로 정수 엔트로피에 섞어
스케줄링 순서와 무관하게 같은 키는 항상 같은 스트림을 만든다.
"""

import hashlib
from typing import List, Union

import numpy as np

from models.errors import UsageError

StreamKey = Union[str, int, float]


def _key_entropy(key: StreamKey) -> int:
    digest = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master_seed: int, *keys: StreamKey) -> np.random.SeedSequence:
    if master_seed < 0:
        raise UsageError(f"master seed must be a nonnegative integer, got {master_seed}")
    entropy = [int(master_seed)] + [_key_entropy(k) for k in keys]
    return np.random.SeedSequence(entropy)


def make_stream(master_seed: int, *keys: StreamKey) -> np.random.Generator:
    """(master_seed, keys)로 결정되는 독립 생성기"""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, *keys)))


def child_seeds(rng: np.random.Generator, count: int) -> List[int]:
    """부모 스트림에서 자식 시드를 뽑는다 (부트스트랩/순열 반복용)"""
    return [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=count, dtype=np.int64)]


def stream_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
