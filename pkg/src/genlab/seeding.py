"""Deterministic seed derivation.

All randomness in the package flows from a root seed through a splittable
counter scheme: child seeds are keyed by a path of labels, so evaluation
order (and parallel execution) cannot change any drawn value.
"""

from __future__ import annotations

import hashlib
import random

_MASK = (1 << 63) - 1


def derive_seed(root: int, *path: object) -> int:
    """Derive a child seed from `root` and a label path. Stable across runs."""
    key = f"{root}|" + "/".join(str(p) for p in path)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & _MASK


def make_rng(root: int, *path: object) -> random.Random:
    """A `random.Random` seeded by `derive_seed(root, *path)`."""
    return random.Random(derive_seed(root, *path))
