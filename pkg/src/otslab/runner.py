"""Seed derivation, parallel trial maps and binomial confidence intervals."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

Z95 = 1.959963984540054


def trial_seed(master: int, index: int, label: str = "") -> int:
    """Stable 64-bit seed for trial ``index`` under ``master``."""
    h = hashlib.blake2b(digest_size=8, person=b"otslab-trial")
    h.update(int(master).to_bytes(16, "big", signed=False))
    h.update(int(index).to_bytes(8, "big"))
    h.update(label.encode())
    return int.from_bytes(h.digest(), "big")


def trial_seeds(master: int, trials: int, label: str = "") -> list[int]:
    return [trial_seed(master, i, label) for i in range(trials)]


def wilson(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials) if trials else 0.0


def map_trials(fn: Callable, args: Sequence, jobs: int = 1) -> list:
    """``[fn(a) for a in args]``, optionally across processes; result order follows ``args``."""
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * jobs))))


def chunked(items: Iterable, size: int) -> list[list]:
    out, cur = [], []
    for x in items:
        cur.append(x)
        if len(cur) == size:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out
