from __future__ import annotations
import numpy as np

_MASK64 = (1 << 64) - 1

# stream tag: 같은 master seed 에서 용도별로 독립 스트림을 뽑는다
STREAM_PLANT = 1
STREAM_SIGNAL = 2
STREAM_NOISE = 3
STREAM_INIT = 4
STREAM_TRIAL = 5


def mix64(x: int) -> int:
    """splitmix64 finalizer"""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *counters: int) -> int:
    """(seed, counter...) -> 64bit seed. 카운터 기반 분할이라 순서/병렬도와 무관."""
    h = mix64(int(seed) & _MASK64)
    for c in counters:
        h = mix64(h ^ (int(c) & _MASK64))
    return h


def generator(seed: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *counters))
