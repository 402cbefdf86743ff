"""Shared runtime: fork-join execution, auxiliary-space metering, splittable RNG.

Every algorithm in this package operates in place on 1-D contiguous numpy
arrays of unsigned 64-bit words.  Auxiliary heap space is counted in 64-bit
words and charged to the active :class:`SpaceMeter` through :func:`alloc` /
:func:`release`; persistent buffers must be charged, while frame-local
numpy temporaries (which live and die LIFO inside a single call) play the
role of stack-allocated space and are not charged.  In-place ("zero heap")
operations additionally restrict themselves to constant-size scratch of at
most ``SCRATCH_WORDS`` words per call.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

WORD = np.uint64
M64 = (1 << 64) - 1
NIL = M64  # shared sentinel for "no pointer" / empty table slot
GOLDEN = 0x9E3779B97F4A7C15
DEFAULT_GRAIN = 4096
SCRATCH_WORDS = 256

__all__ = [
    "WORD", "M64", "NIL", "SCRATCH_WORDS",
    "as_words", "make_words",
    "set_num_threads", "num_threads", "parallel_for", "parallel_blocks",
    "fork_join",
    "SpaceMeter", "MeterReport", "meter_scope", "metered", "alloc",
    "alloc_bool", "release", "aux",
    "Rng", "EpsilonConfig", "POWER_ONLY_FRACTION",
    "compact_by_mask",
]


# ---------------------------------------------------------------------------
# Word arrays

def as_words(a: np.ndarray) -> np.ndarray:
    """Validate that ``a`` is a mutable 1-D contiguous uint64 array."""
    if not isinstance(a, np.ndarray) or a.dtype != WORD or a.ndim != 1:
        raise TypeError("expected a 1-D numpy array of uint64 words")
    if not a.flags.c_contiguous:
        raise TypeError("word arrays must be C-contiguous")
    return a


def make_words(values) -> np.ndarray:
    """Build a word array from a python iterable (values taken mod 2^64)."""
    return np.array([int(v) & M64 for v in values], dtype=WORD)


# ---------------------------------------------------------------------------
# Fork-join pool
#
# The contract mirrors binary fork-join: bodies run exactly once per index
# and must either write to disjoint locations or perform only commutative
# updates.  Work is dispatched to a process-wide thread pool; a semaphore
# bounds in-flight submissions below the worker count so that nested
# fork/parallel_for calls from inside pool workers can never deadlock.

_pool_lock = threading.Lock()
_workers = 1
_executor: ThreadPoolExecutor | None = None
_permits: threading.Semaphore | None = None


def set_num_threads(n: int) -> None:
    """Configure the fork-join pool size (1 disables the pool entirely)."""
    global _workers, _executor, _permits
    if n < 1:
        raise ValueError("thread count must be >= 1")
    with _pool_lock:
        if n == _workers and (n == 1 or _executor is not None):
            return
        if _executor is not None:
            _executor.shutdown(wait=True)
            _executor = None
        _workers = n
        if n > 1:
            _executor = ThreadPoolExecutor(max_workers=n)
            _permits = threading.Semaphore(n - 1)
        else:
            _permits = None


def num_threads() -> int:
    return _workers


def _try_submit(fn):
    """Submit ``fn`` if a pool permit is free, else return None."""
    ex, sem = _executor, _permits
    if ex is None or sem is None or not sem.acquire(blocking=False):
        return None

    def run():
        try:
            return fn()
        finally:
            sem.release()

    return ex.submit(run)


def parallel_blocks(lo: int, hi: int, body, grain: int = DEFAULT_GRAIN) -> None:
    """Run ``body(s, t)`` over disjoint subranges covering [lo, hi)."""
    n = hi - lo
    if n <= 0:
        return
    if _workers == 1 or n <= grain:
        body(lo, hi)
        return
    nchunks = min((n + grain - 1) // grain, 4 * _workers)
    bounds = [lo + (n * i) // nchunks for i in range(nchunks + 1)]
    futures = []
    for i in range(nchunks - 1):
        s, t = bounds[i], bounds[i + 1]
        fut = _try_submit(lambda s=s, t=t: body(s, t))
        if fut is None:
            body(s, t)
        else:
            futures.append(fut)
    body(bounds[nchunks - 1], bounds[nchunks])
    for fut in futures:
        fut.result()


def parallel_for(lo: int, hi: int, body, grain: int = DEFAULT_GRAIN) -> None:
    """Run ``body(i)`` once for every i in [lo, hi)."""

    def run(s: int, t: int) -> None:
        for i in range(s, t):
            body(i)

    parallel_blocks(lo, hi, run, grain)


def fork_join(*thunks):
    """Run thunks as forked children; returns their results in order."""
    k = len(thunks)
    results = [None] * k
    futures = [None] * k
    for i in range(k - 1):
        futures[i] = _try_submit(thunks[i])
        if futures[i] is None:
            results[i] = thunks[i]()
    results[k - 1] = thunks[k - 1]()
    for i in range(k - 1):
        if futures[i] is not None:
            results[i] = futures[i].result()
    return tuple(results)


# ---------------------------------------------------------------------------
# Space metering

@dataclass
class MeterReport:
    peak_words: int
    budget_words: int
    exceeded: bool


class SpaceMeter:
    """Counts auxiliary heap words held by instrumented operations."""

    def __init__(self) -> None:
        self.current_words = 0
        self.peak_words = 0
        self._lock = threading.Lock()

    def acquire(self, words: int) -> None:
        if words < 0:
            raise ValueError("cannot acquire a negative word count")
        with self._lock:
            self.current_words += words
            if self.current_words > self.peak_words:
                self.peak_words = self.current_words

    def release(self, words: int) -> None:
        with self._lock:
            self.current_words -= words
            if self.current_words < 0:
                raise RuntimeError("space meter released more than acquired")


_meter_stack: list[SpaceMeter] = []


@contextmanager
def metered(meter: SpaceMeter):
    _meter_stack.append(meter)
    try:
        yield meter
    finally:
        _meter_stack.pop()


def _active_meter() -> SpaceMeter | None:
    return _meter_stack[-1] if _meter_stack else None


def meter_scope(meter: SpaceMeter, budget_words: int, body) -> MeterReport:
    """Run ``body`` with ``meter`` active; never aborts on budget overrun."""
    with metered(meter):
        body()
    return MeterReport(
        peak_words=meter.peak_words,
        budget_words=budget_words,
        exceeded=meter.peak_words > budget_words,
    )


def _charge_words(nbytes: int) -> int:
    return (nbytes + 7) // 8


def alloc(n: int, dtype=WORD, fill=None) -> np.ndarray:
    """Allocate a charged auxiliary buffer of ``n`` elements."""
    arr = np.empty(n, dtype=dtype)
    if fill is not None:
        arr.fill(fill)
    m = _active_meter()
    if m is not None:
        m.acquire(_charge_words(arr.nbytes))
    return arr


def alloc_bool(n: int, fill: bool = False) -> np.ndarray:
    return alloc(n, dtype=np.bool_, fill=fill)


def release(arr: np.ndarray) -> None:
    m = _active_meter()
    if m is not None:
        m.release(_charge_words(arr.nbytes))


@contextmanager
def aux(n: int, dtype=WORD, fill=None):
    """Charged auxiliary buffer released on scope exit."""
    arr = alloc(n, dtype=dtype, fill=fill)
    try:
        yield arr
    finally:
        release(arr)


# ---------------------------------------------------------------------------
# Counter-based splittable RNG
#
# value(seed, i) is a pure function, so draws are independent of thread
# count and scheduling.  The mix is the SplitMix64 finalizer over a
# golden-ratio counter stream.

def _mix64_scalar(z: int) -> int:
    z &= M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> WORD(30))
    z = z * WORD(0xBF58476D1CE4E5B9)
    z = z ^ (z >> WORD(27))
    z = z * WORD(0x94D049BB133111EB)
    return z ^ (z >> WORD(31))


class Rng:
    """Deterministic counter-based random words."""

    __slots__ = ("seed",)

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & M64

    def word(self, i: int) -> int:
        return _mix64_scalar(self.seed + (i + 1) * GOLDEN)

    def words(self, lo: int, hi: int) -> np.ndarray:
        idx = np.arange(lo + 1, hi + 1, dtype=WORD)
        return _mix64((idx * WORD(GOLDEN)) + WORD(self.seed))

    def words_at(self, idx: np.ndarray) -> np.ndarray:
        z = (idx.astype(WORD) + WORD(1)) * WORD(GOLDEN) + WORD(self.seed)
        return _mix64(z)

    def below(self, i: int, bound: int) -> int:
        # modulo bias is < bound / 2^64, irrelevant at desk scale
        return self.word(i) % bound

    def derive(self, tag: int) -> "Rng":
        return Rng(_mix64_scalar(self.seed ^ _mix64_scalar(tag)))


# ---------------------------------------------------------------------------
# Relaxed-model budgets

POWER_ONLY_FRACTION = 1e-12  # effectively disables the percentage floor


@dataclass(frozen=True)
class EpsilonConfig:
    """Auxiliary-space budget b(n) = max(ceil(n^(1-epsilon)), floor(f*n))."""

    epsilon: float
    prefix_fraction: float = 0.02

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.prefix_fraction <= 1.0:
            raise ValueError("prefix_fraction must lie in (0, 1]")

    def prefix_words(self, n: int) -> int:
        if n < 1:
            return 1
        b = max(math.ceil(n ** (1.0 - self.epsilon)),
                math.floor(self.prefix_fraction * n))
        return min(max(b, 1), n)


# ---------------------------------------------------------------------------
# Shared in-place primitive

def compact_by_mask(arr: np.ndarray, keep: np.ndarray, n: int | None = None) -> int:
    """Stable in-place compaction of arr[i] with keep[i]; returns new count.

    Uses only constant scratch (one block of SCRATCH_WORDS at a time), so it
    is safe inside zero-heap operations.
    """
    n = len(arr) if n is None else n
    w = 0
    s = 0
    while s < n:
        t = min(s + SCRATCH_WORDS, n)
        idx = np.flatnonzero(keep[s:t])
        cnt = len(idx)
        if cnt:
            if w == s and cnt == t - s:
                w = t
            else:
                arr[w:w + cnt] = arr[s:t][idx]
                w += cnt
        s = t
    return w
