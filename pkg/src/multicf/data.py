"""Rating datasets: containers, tab-separated file I/O, and time binning."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, ParseError, RangeError


class RatingRecord(NamedTuple):
    user: int
    item: int
    score: float
    time: int


@dataclass(frozen=True)
class ScoreScale:
    lo: float = 0.0
    hi: float = 100.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"score scale requires lo < hi, got [{self.lo}, {self.hi}]")

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi


DEFAULT_SCALE = ScoreScale(0.0, 100.0)


@dataclass(frozen=True)
class TimeBinner:
    """Maps timestamps in [t_min, t_max] onto num_bins near-equal-width bins."""

    t_min: int
    t_max: int
    num_bins: int = 30

    def __post_init__(self):
        if self.num_bins < 1:
            raise ConfigError("num_bins must be >= 1")
        if self.t_max < self.t_min:
            raise ConfigError("t_max must be >= t_min")

    def bin_of(self, t: int) -> int:
        if t < self.t_min or t > self.t_max:
            raise RangeError(f"timestamp {t} outside [{self.t_min}, {self.t_max}]")
        span = self.t_max - self.t_min + 1
        return (int(t) - self.t_min) * self.num_bins // span

    def bins(self, times: np.ndarray, clamp: bool = False) -> np.ndarray:
        """Vectorized bin_of. With clamp=True out-of-range timestamps snap to the
        nearest boundary instead of raising (batch prediction mode)."""
        t = np.asarray(times, dtype=np.int64)
        if clamp:
            t = np.clip(t, self.t_min, self.t_max)
        elif t.size and (t.min() < self.t_min or t.max() > self.t_max):
            bad = t[(t < self.t_min) | (t > self.t_max)][0]
            raise RangeError(f"timestamp {bad} outside [{self.t_min}, {self.t_max}]")
        span = self.t_max - self.t_min + 1
        return (t - self.t_min) * self.num_bins // span


def bin_of(t: int, binner: TimeBinner) -> int:
    return binner.bin_of(t)


@dataclass
class Dataset:
    """A split of observed (user, item, score, time) ratings.

    Records are kept in parallel arrays in file order; a CSR index grouped by
    user is built lazily so each user's rated set is enumerable in O(1)
    amortized per record.
    """

    users: np.ndarray
    items: np.ndarray
    scores: np.ndarray
    times: np.ndarray
    split: str = "train"
    num_users: int = 0
    num_items: int = 0
    t_min: int = 0
    t_max: int = 0
    scale: ScoreScale = DEFAULT_SCALE
    _user_order: np.ndarray | None = field(default=None, repr=False, compare=False)
    _user_ptr: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_arrays(cls, users, items, scores, times, split="train",
                    scale: ScoreScale = DEFAULT_SCALE,
                    num_users: int | None = None, num_items: int | None = None) -> "Dataset":
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.float64)
        times = np.asarray(times, dtype=np.int64)
        n = users.size
        if not (items.size == n and scores.size == n and times.size == n):
            raise ConfigError("rating arrays must have equal length")
        if num_users is None:
            num_users = int(users.max()) + 1 if n else 0
        if num_items is None:
            num_items = int(items.max()) + 1 if n else 0
        if n and (users.min() < 0 or users.max() >= num_users):
            raise RangeError("user id outside [0, num_users)")
        if n and (items.min() < 0 or items.max() >= num_items):
            raise RangeError("item id outside [0, num_items)")
        t_min = int(times.min()) if n else 0
        t_max = int(times.max()) if n else 0
        return cls(users, items, scores, times, split, num_users, num_items,
                   t_min, t_max, scale)

    def __len__(self) -> int:
        return self.users.size

    def record(self, k: int) -> RatingRecord:
        return RatingRecord(int(self.users[k]), int(self.items[k]),
                            float(self.scores[k]), int(self.times[k]))

    def records(self) -> Iterator[RatingRecord]:
        for k in range(len(self)):
            yield self.record(k)

    def by_user(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR index over users: (order, ptr) with order[ptr[u]:ptr[u+1]]
        giving u's record indices in file order."""
        if self._user_ptr is None:
            order = np.argsort(self.users, kind="stable")
            counts = np.bincount(self.users, minlength=self.num_users)
            ptr = np.zeros(self.num_users + 1, dtype=np.int64)
            np.cumsum(counts, out=ptr[1:])
            self._user_order = order.astype(np.int64)
            self._user_ptr = ptr
        return self._user_order, self._user_ptr

    def items_of(self, u: int) -> np.ndarray:
        order, ptr = self.by_user()
        return self.items[order[ptr[u]:ptr[u + 1]]]

    def global_mean(self) -> float:
        return float(self.scores.mean()) if len(self) else 0.0

    def concat(self, other: "Dataset", split: str = "train") -> "Dataset":
        """Union of two splits, preserving record order (self first)."""
        return Dataset.from_arrays(
            np.concatenate([self.users, other.users]),
            np.concatenate([self.items, other.items]),
            np.concatenate([self.scores, other.scores]),
            np.concatenate([self.times, other.times]),
            split=split, scale=self.scale,
            num_users=max(self.num_users, other.num_users),
            num_items=max(self.num_items, other.num_items))


def load_ratings(path, split: str = "train", scale: ScoreScale = DEFAULT_SCALE) -> Dataset:
    """Parse a `user<TAB>item<TAB>score<TAB>time` file; '#' lines are comments."""
    users, items, scores, times = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(path, line_no,
                                 f"expected 4 tab-separated fields, got {len(parts)}")
            try:
                u = int(parts[0])
                i = int(parts[1])
                s = float(parts[2])
                t = int(parts[3])
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field: {exc}") from None
            if u < 0 or i < 0:
                raise ParseError(path, line_no, "negative id")
            if not scale.contains(s):
                raise RangeError(
                    f"{path}:{line_no}: score {s} outside scale [{scale.lo}, {scale.hi}]")
            users.append(u)
            items.append(i)
            scores.append(s)
            times.append(t)
    return Dataset.from_arrays(users, items, scores, times, split=split, scale=scale)


def save_ratings(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(len(dataset)):
            fh.write(f"{dataset.users[k]}\t{dataset.items[k]}\t"
                     f"{format_score(dataset.scores[k])}\t{dataset.times[k]}\n")


def format_score(x: float) -> str:
    """Shortest decimal that round-trips through float()."""
    return repr(float(x))
