"""Seeded, splittable random streams.

Every random draw in the package comes from ``substream(seed, label)``, a
Philox (counter-based) generator keyed by the run seed and a stream label.
Independent trials therefore sample the same values no matter how they are
scheduled across workers.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np


def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, label: str = "") -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, *_label_words(label)])
    return np.random.Generator(np.random.Philox(ss))


def worker_count() -> int:
    """Worker cap from ``GROWTHLAB_THREADS`` (default 1)."""
    raw = os.environ.get("GROWTHLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GROWTHLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"GROWTHLAB_THREADS must be a positive integer, got {raw!r}")
    return n
