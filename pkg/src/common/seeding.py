"""Sub-seed derivation.

Every random stream in a run is ``np.random.default_rng(derive_seed(master, *purpose))``.
A purpose is a tuple of strings (e.g. ``("noise", "IPD", "w00012", "middle")``), so
adding a new component never shifts the streams of the existing ones.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _purpose_key(purpose: tuple[object, ...]) -> int:
    text = "\x1f".join(str(part) for part in purpose)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, *purpose: object) -> int:
    if master < 0:
        raise ValueError("master seed must be non-negative")
    state = splitmix64(int(master) & _MASK64)
    return splitmix64(state ^ _purpose_key(purpose))


def derive_rng(master: int, *purpose: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *purpose))
