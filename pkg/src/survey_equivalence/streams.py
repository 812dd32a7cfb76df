"""Deterministic random streams keyed by task identifiers.

Every random decision in a computation is addressed by a task id (a tuple of
ints/strings), so results never depend on evaluation order or on how work is
split across workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_hash(value) -> int:
    """64-bit hash that is stable across processes (unlike ``hash``)."""
    if isinstance(value, (int, np.integer)) and 0 <= int(value) <= _MASK64:
        return int(value)
    data = repr(value).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def item_keys(item_ids) -> np.ndarray:
    return np.fromiter((stable_hash(str(i)) for i in item_ids), dtype=np.uint64,
                       count=len(item_ids))


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class RandomSource:
    seed: int = 0

    def _words(self, task) -> list[int]:
        return [stable_hash(t) for t in task]

    def generator(self, *task) -> np.random.Generator:
        """Independent numpy generator for one task id."""
        ss = np.random.SeedSequence(self.seed & _MASK64, spawn_key=tuple(self._words(task)))
        return np.random.default_rng(ss)

    def uniforms(self, keys: np.ndarray, *task) -> np.ndarray:
        """One uniform in [0, 1) per key, a pure function of (seed, task, key).

        Counter-based, so the draw for an item does not move when other items
        are added, dropped, reordered or duplicated.
        """
        salt = self.seed & _MASK64
        for w in self._words(task):
            salt = int(_splitmix64(np.array([salt ^ w], dtype=np.uint64))[0])
        with np.errstate(over="ignore"):
            mixed = _splitmix64(np.asarray(keys, dtype=np.uint64) ^ np.uint64(salt))
            mixed = _splitmix64(mixed)
        return (mixed >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def as_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(0)
    return RandomSource(int(rng))
