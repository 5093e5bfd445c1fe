"""Shared-memory execution layer: per-item locking, parallel iteration, benchmark.

SGD-family trainers parallelize over users; user-side state then needs no
locking and item-side state is guarded by one mutual-exclusion slot per item
id. Lock sets are always acquired in ascending id order, which rules out
deadlock. Row-parallel solvers (ALS) touch disjoint rows and are bit-identical
for every thread count.
"""
from __future__ import annotations

import math
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class LockTable:
    """One mutual-exclusion slot per item id (taxonomy nodes included)."""

    def __init__(self, num_items: int):
        self._locks = [threading.Lock() for _ in range(num_items)]

    def __len__(self) -> int:
        return len(self._locks)

    @contextmanager
    def acquire(self, ids):
        """Hold the locks for a batch of ids, acquired in ascending order."""
        batch = sorted(set(int(i) for i in ids))
        for i in batch:
            self._locks[i].acquire()
        try:
            yield
        finally:
            for i in reversed(batch):
                self._locks[i].release()

    @contextmanager
    def acquire_one(self, i: int):
        lock = self._locks[int(i)]
        lock.acquire()
        try:
            yield
        finally:
            lock.release()


class NullLockTable:
    """No-op lock table for sequential execution."""

    @contextmanager
    def acquire(self, ids):
        yield

    @contextmanager
    def acquire_one(self, i):
        yield


NULL_LOCKS = NullLockTable()


@dataclass
class UserTask:
    """One user's worth of training work plus the item ids it may mutate."""

    user: int
    touched: np.ndarray
    run: Callable[[object], None]


class _Cursor:
    """Hands out task indices in order to worker threads."""

    def __init__(self, n: int):
        self._n = n
        self._next = 0
        self._lock = threading.Lock()
        self.stop = False
        self.error: BaseException | None = None

    def take(self) -> int:
        with self._lock:
            if self.stop or self._next >= self._n:
                return -1
            k = self._next
            self._next += 1
            return k

    def fail(self, exc: BaseException) -> None:
        with self._lock:
            if self.error is None:
                self.error = exc
            self.stop = True


def _run_workers(n_tasks: int, threads: int, body: Callable[[int], None]) -> None:
    cursor = _Cursor(n_tasks)

    def worker():
        while True:
            k = cursor.take()
            if k < 0:
                return
            try:
                body(k)
            except BaseException as exc:  # abort the epoch on the first failure
                cursor.fail(exc)
                return

    workers = [threading.Thread(target=worker) for _ in range(threads)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if cursor.error is not None:
        raise cursor.error


def parallel_for_users(tasks: Sequence[UserTask], threads: int, locks) -> None:
    """Run every task exactly once; with threads == 1 this is a plain
    sequential loop in the given order."""
    if threads <= 1:
        for t in tasks:
            t.run(locks)
        return
    _run_workers(len(tasks), threads, lambda k: tasks[k].run(locks))


def run_blocks(work: Callable[[int, int], None], bounds: np.ndarray, threads: int) -> None:
    """Execute work(lo, hi) for consecutive [bounds[k], bounds[k+1]) blocks."""
    n_blocks = len(bounds) - 1
    if threads <= 1:
        for k in range(n_blocks):
            work(int(bounds[k]), int(bounds[k + 1]))
        return
    _run_workers(n_blocks, threads, lambda k: work(int(bounds[k]), int(bounds[k + 1])))


def even_bounds(n_rows: int, n_blocks: int) -> np.ndarray:
    return np.linspace(0, n_rows, max(n_blocks, 1) + 1).astype(np.int64)


def parallel_map_rows(work: Callable[[int], None], n_rows: int, threads: int) -> None:
    """Apply an independent per-row task to every row; output must depend only
    on frozen inputs, so any thread count yields identical results."""

    def block(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            try:
                work(r)
            except BaseException as exc:
                raise RuntimeError(f"row task failed at row {r}") from exc

    run_blocks(block, even_bounds(n_rows, max(threads, 1)), threads)


@dataclass
class BenchRow:
    algo: str
    threads: int
    D: int
    iter_ms: float
    speedup: float
    rmse: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def tsv_lines(self) -> list[str]:
        out = ["algo\tthreads\tD\titer_ms\tspeedup\trmse"]
        for r in self.rows:
            out.append(f"{r.algo}\t{r.threads}\t{r.D}\t{r.iter_ms:.3f}\t"
                       f"{r.speedup:.3f}\t{r.rmse:.4f}")
        return out


_BENCH_SGD_KINDS = ("sgd", "svdpp", "time-svd", "time-svdpp")


def bench(algorithms: Sequence[str], thread_counts: Sequence[int],
          d_values: Sequence[int], train, validation, seed: int = 0,
          epochs: int = 3) -> BenchReport:
    """Median-of-3 iteration times (one discarded warm-up) per configuration.

    Thread sweeps run each algorithm at fixed D for every requested thread
    count; D sweeps run single-threaded. Validation RMSE after the timed
    epochs lands in every row.
    """
    from . import factor
    from .evaluation import rmse as rmse_of

    report = BenchReport()

    def run_config(algo: str, D: int, threads: int) -> tuple[float, float]:
        hyper = factor.default_hyper(algo)
        hyper.D = D
        hyper.iters = epochs
        model = factor.init_model(algo, train, hyper, seed)
        locks = LockTable(train.num_items) if threads > 1 else NULL_LOCKS
        times = []
        for ep in range(epochs + 1):
            t0 = time.perf_counter()
            factor.run_epoch(model, train, hyper, threads=threads, locks=locks)
            if ep > 0:  # first epoch is JIT/caching warm-up
                times.append(time.perf_counter() - t0)
        pred = factor.predict_batch(model, validation.users, validation.items,
                                    validation.times, train)
        err = rmse_of(train.scale.clip(pred), validation.scores)
        return float(np.median(times) * 1000.0), err

    for algo in algorithms:
        base_ms = None
        for threads in sorted(set(int(t) for t in thread_counts)):
            d_fixed = 20
            iter_ms, err = run_config(algo, d_fixed, threads)
            if threads == 1 or base_ms is None:
                base_ms = iter_ms if threads == 1 else iter_ms
            speedup = 1.0 if threads == 1 else base_ms / iter_ms
            report.rows.append(BenchRow(algo, threads, d_fixed, iter_ms, speedup, err))
        if algo in _BENCH_SGD_KINDS or algo in ("als", "wals"):
            for D in d_values:
                iter_ms, err = run_config(algo, int(D), 1)
                report.rows.append(BenchRow(algo, 1, int(D), iter_ms, 1.0, err))
    return report
