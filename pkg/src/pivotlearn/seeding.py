"""Deterministic seed derivation and counter-based pair hashing.

Every random decision in the package flows through one of two primitives:

* ``derive_rng(master_seed, *tags)`` builds an independent numpy Generator
  from a master seed and a sequence of task tags.  Identical inputs give an
  identical stream on every platform and under any worker count, because the
  stream never depends on execution order.
* ``pair_uniform(seed, u, v)`` maps an unordered item pair to a uniform
  float in [0, 1) with a splitmix64-style finalizer.  Label noise is frozen
  through this function, so an oracle's answers are a pure function of
  (ground truth, noise spec, seed) no matter when or how often it is asked.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed_seq", "derive_rng", "pair_uniform", "tag_to_int"]

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


def tag_to_int(tag) -> int:
    """Stable 64-bit integer for a string or integer tag."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed_seq(master_seed: int, *tags) -> np.random.SeedSequence:
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(tag_to_int(t) for t in tags)
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *tags) -> np.random.Generator:
    """Independent Generator keyed by (master_seed, tags)."""
    return np.random.Generator(np.random.Philox(derive_seed_seq(master_seed, *tags)))


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, vectorized on uint64
    z = (x + _GOLDEN) & ~_U64(0)
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def pair_uniform(seed: int, u, v) -> np.ndarray:
    """Uniform [0, 1) value per unordered pair {u, v}, seed-keyed.

    Accepts scalars or arrays; the result is symmetric in (u, v).
    """
    u = np.asarray(u, dtype=np.uint64)
    v = np.asarray(v, dtype=np.uint64)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    with np.errstate(over="ignore"):
        key = _mix64((lo << _U64(32)) ^ hi)
        h = _mix64(key ^ _U64(tag_to_int(seed)))
    return (h >> _U64(11)).astype(np.float64) * (2.0**-53)
