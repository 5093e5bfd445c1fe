"""Item-based kNN: adjusted-cosine similarity, blocked top-K construction,
and plain / time-decayed prediction.

Similarities accumulate over co-raters in ascending user order, so the
blocked engine, the scalar API and any brute-force re-computation that walks
users in the same order agree bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .data import Dataset
from .errors import ConfigError, ParseError
from .parallel import run_blocks


@dataclass
class UserMeanTable:
    """Per-user training rating means; users without ratings are absent."""

    value: np.ndarray
    has: np.ndarray

    def get(self, u: int) -> float | None:
        if 0 <= u < self.value.size and self.has[u]:
            return float(self.value[u])
        return None

    def __contains__(self, u: int) -> bool:
        return 0 <= u < self.value.size and bool(self.has[u])


def user_means(train: Dataset) -> UserMeanTable:
    sums = np.bincount(train.users, weights=train.scores, minlength=train.num_users)
    counts = np.bincount(train.users, minlength=train.num_users)
    has = counts > 0
    value = np.zeros(train.num_users)
    value[has] = sums[has] / counts[has]
    return UserMeanTable(value, has)


def _item_csr(train: Dataset, means: UserMeanTable):
    """Per-item lists of (user, centered rating), users ascending."""
    order = np.lexsort((train.users, train.items))
    items = train.items[order]
    users = train.users[order]
    cvals = train.scores[order] - means.value[users]
    counts = np.bincount(train.items, minlength=train.num_items)
    ptr = np.zeros(train.num_items + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, users.astype(np.int64), cvals


def adjusted_cosine(i: int, j: int, train: Dataset, means: UserMeanTable | None = None,
                    _csr=None) -> float:
    """AC similarity of items i and j over their co-raters; 0 when there is no
    co-rating evidence or either centered norm vanishes."""
    if means is None:
        means = user_means(train)
    ptr, users, cvals = _csr if _csr is not None else _item_csr(train, means)
    if not (0 <= i < ptr.size - 1 and 0 <= j < ptr.size - 1):
        return 0.0
    a, b = int(ptr[i]), int(ptr[j])
    end_a, end_b = int(ptr[i + 1]), int(ptr[j + 1])
    num = 0.0
    di = 0.0
    dj = 0.0
    n = 0
    while a < end_a and b < end_b:
        if users[a] < users[b]:
            a += 1
        elif users[a] > users[b]:
            b += 1
        else:
            x = cvals[a]
            y = cvals[b]
            num += x * y
            di += x * x
            dj += y * y
            n += 1
            a += 1
            b += 1
    if n == 0 or di == 0.0 or dj == 0.0:
        return 0.0
    return num / math.sqrt(di * dj)


@dataclass
class NeighborTable:
    """Per-item top-K neighbors sorted by |w| descending, ties toward smaller
    item id."""

    K: int
    ids: np.ndarray     # (I, K) int64, padded
    w: np.ndarray       # (I, K) float64
    length: np.ndarray  # (I,) valid entries per item
    ids_by_item: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def num_items(self) -> int:
        return self.length.size

    def neighbors(self, i: int) -> list[tuple[int, float]]:
        m = int(self.length[i])
        return [(int(self.ids[i, k]), float(self.w[i, k])) for k in range(m)]


def build_neighbors(train: Dataset, K: int = 50, num_parts: int = 300,
                    threads: int = 1, means: UserMeanTable | None = None) -> NeighborTable:
    """Top-K largest-|w| similarities for every item against all others.

    Items are processed in num_parts blocks to bound the working set; the
    result is identical for any num_parts and any thread count.
    """
    if K < 1:
        raise ConfigError("K must be >= 1")
    if num_parts < 1:
        raise ConfigError("num_parts must be >= 1")
    if means is None:
        means = user_means(train)
    I = train.num_items
    ptr, users, cvals = _item_csr(train, means)
    ids = np.zeros((I, K), dtype=np.int64)
    w = np.zeros((I, K))
    length = np.zeros(I, dtype=np.int64)
    if I == 0:
        return NeighborTable(K, ids, w, length)
    bounds = np.linspace(0, I, min(num_parts, I) + 1).astype(np.int64)

    def work(lo: int, hi: int) -> None:
        kernels.ac_topk_block(lo, hi, ptr, users, cvals, K, ids, w, length)

    run_blocks(work, bounds, threads)
    return NeighborTable(K, ids, w, length)


def predict_knn(u: int, i: int, table: NeighborTable, train: Dataset,
                means: UserMeanTable | None = None) -> float:
    """Weighted neighbor average over R_u intersect N_i; falls back to the
    user's mean, then the global mean."""
    return predict_knn_time(u, i, 0, 0.0, table, train, means)


def predict_knn_time(u: int, i: int, t: int, beta: float, table: NeighborTable,
                     train: Dataset, means: UserMeanTable | None = None) -> float:
    """Time-decayed neighbor average; each term decays by the age of that
    neighbor rating's own timestamp. beta == 0 reproduces predict_knn."""
    if beta < 0:
        raise ConfigError("beta must be >= 0")
    if means is None:
        means = user_means(train)
    rated: dict[int, tuple[float, int]] = {}
    if 0 <= u < train.num_users:
        order, ptr = train.by_user()
        for k in order[ptr[u]:ptr[u + 1]]:
            rated.setdefault(int(train.items[k]), (float(train.scores[k]), int(train.times[k])))
    num = 0.0
    den = 0.0
    if 0 <= i < table.num_items:
        for j, w_ij in table.neighbors(i):
            if j in rated:
                r_uj, t_uj = rated[j]
                f = 1.0 if beta == 0.0 else math.exp(-beta * (t - t_uj))
                num += f * w_ij * r_uj
                den += f * abs(w_ij)
    if den > 0.0:
        return num / den
    m = means.get(u)
    if m is not None:
        return m
    return train.global_mean()


def predict_knn_batch(users, items, times, table: NeighborTable, train: Dataset,
                      beta: float = 0.0, means: UserMeanTable | None = None) -> np.ndarray:
    """Vectorized predict_knn_time over query triples (identical fallbacks)."""
    if means is None:
        means = user_means(train)
    order = np.lexsort((train.items, train.users))
    u_items = train.items[order].astype(np.int64)
    u_scores = train.scores[order]
    u_times = train.times[order].astype(np.int64)
    counts = np.bincount(train.users, minlength=train.num_users)
    u_ptr = np.zeros(train.num_users + 1, dtype=np.int64)
    np.cumsum(counts, out=u_ptr[1:])
    out = np.empty(np.asarray(users).size)
    kernels.knn_predict_batch(np.asarray(users, dtype=np.int64),
                        np.asarray(items, dtype=np.int64),
                        np.asarray(times, dtype=np.int64),
                        table.ids, table.w, table.length,
                        u_ptr, u_items, u_scores, u_times,
                        float(beta), means.value, means.has,
                        train.global_mean(), out)
    return out


def save_neighbors(table: NeighborTable, path) -> None:
    """Persist as `i<TAB>j<TAB>w` lines under a small self-describing header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#multicf-knn-v1\n")
        fh.write(f"#K={table.K}\tnum_items={table.num_items}\n")
        for i in range(table.num_items):
            for k in range(int(table.length[i])):
                fh.write(f"{i}\t{table.ids[i, k]}\t{repr(float(table.w[i, k]))}\n")


def load_neighbors(path) -> NeighborTable:
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != "#multicf-knn-v1":
            raise ParseError(path, 1, "not a neighbor table file")
        header = fh.readline().strip().lstrip("#")
        fields = dict(kv.split("=") for kv in header.split("\t"))
        K_val = int(fields["K"])
        I = int(fields["num_items"])
        ids = np.zeros((I, K_val), dtype=np.int64)
        w = np.zeros((I, K_val))
        length = np.zeros(I, dtype=np.int64)
        for line_no, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(path, line_no, "expected i<TAB>j<TAB>w")
            i = int(parts[0])
            k = int(length[i])
            ids[i, k] = int(parts[1])
            w[i, k] = float(parts[2])
            length[i] = k + 1
    return NeighborTable(K_val, ids, w, length)
