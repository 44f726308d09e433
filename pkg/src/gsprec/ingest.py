"""Interaction logs: parsing, dense re-indexing, per-user splits, X and sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp


class IngestError(ValueError):
    """Raised for unreadable or malformed interaction files."""


class Interaction(NamedTuple):
    user: int
    item: int
    timestamp: float


@dataclass(frozen=True)
class ColumnFormat:
    """Where the user/item/timestamp fields live in a delimited file."""

    delimiter: str = "\t"
    user_col: int = 0
    item_col: int = 1
    time_col: int = 3
    skip_header: bool = False

    @classmethod
    def preset(cls, name: str) -> "ColumnFormat":
        presets = {
            "ml100k": cls("\t", 0, 1, 3),
            "ml1m": cls("::", 0, 1, 3),
            "csv": cls(",", 0, 1, 2, skip_header=True),
        }
        try:
            return presets[name]
        except KeyError:
            raise IngestError(f"unknown format preset {name!r}; choose from {sorted(presets)}") from None


@dataclass(frozen=True, eq=False)
class InteractionLog:
    """Time-sorted interactions over a dense id space.

    ``users``, ``items`` and ``timestamps`` are parallel arrays. ``m`` and ``n``
    cover the full entity index, so a fold taken from a larger log keeps the
    parent's shape even when some users or items are absent from it.
    """

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    m: int
    n: int
    user_index: dict = field(default_factory=dict)
    item_index: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("users", "items", "timestamps"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return int(self.users.shape[0])

    def __iter__(self) -> Iterator[Interaction]:
        for u, i, t in zip(self.users.tolist(), self.items.tolist(), self.timestamps.tolist()):
            yield Interaction(u, i, t)

    def subset(self, mask_or_index) -> "InteractionLog":
        """Same id space, a subset of rows (order preserved)."""
        return InteractionLog(
            self.users[mask_or_index].copy(),
            self.items[mask_or_index].copy(),
            self.timestamps[mask_or_index].copy(),
            self.m,
            self.n,
            self.user_index,
            self.item_index,
        )

    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.users.tolist(), self.items.tolist()))


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: InteractionLog
    validation: InteractionLog
    test: InteractionLog
    seed: int
    strategy: str


def _sort_key_ids(raw_ids) -> list:
    # numeric raw ids sort numerically, anything else lexicographically
    try:
        return sorted(raw_ids, key=lambda s: (0, int(s), s))
    except ValueError:
        return sorted(raw_ids, key=lambda s: (1, 0, s))


def from_arrays(users, items, timestamps, m=None, n=None) -> InteractionLog:
    """Build a log from dense-id arrays (dedup and sort applied)."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    timestamps = np.asarray(timestamps, dtype=np.float64)
    if not (users.shape == items.shape == timestamps.shape):
        raise IngestError("users, items and timestamps must have equal length")
    if users.size and (users.min() < 0 or items.min() < 0):
        raise IngestError("dense ids must be non-negative")
    if not np.all(np.isfinite(timestamps)):
        raise IngestError("timestamps must be finite")
    m = int(users.max() + 1) if m is None else int(m)
    n = int(items.max() + 1) if n is None else int(n)
    if users.size and (users.max() >= m or items.max() >= n):
        raise IngestError("dense ids exceed the declared entity counts")
    users, items, timestamps = _dedup_sorted(users, items, timestamps)
    return InteractionLog(users, items, timestamps, m, n,
                          {i: i for i in range(m)}, {i: i for i in range(n)})


def _dedup_sorted(users, items, timestamps):
    # order: timestamp, then user, then item; identical triplets collapse
    order = np.lexsort((items, users, timestamps))
    users, items, timestamps = users[order], items[order], timestamps[order]
    if users.size > 1:
        dup = (users[1:] == users[:-1]) & (items[1:] == items[:-1]) & (timestamps[1:] == timestamps[:-1])
        keep = np.concatenate([[True], ~dup])
        users, items, timestamps = users[keep], items[keep], timestamps[keep]
    return users, items, timestamps


def load_interactions(path, fmt: ColumnFormat | None = None) -> InteractionLog:
    """Parse a delimited interaction file into a dense-indexed, time-sorted log.

    Ratings and any other columns are ignored: every row is an implicit
    positive. Raises :class:`IngestError` naming the offending line.
    """
    fmt = fmt or ColumnFormat()
    raw_users, raw_items, times = [], [], []
    needed = max(fmt.user_col, fmt.item_col, fmt.time_col)
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if fmt.skip_header and lineno == 1:
                continue
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(fmt.delimiter)
            if len(parts) <= needed:
                raise IngestError(f"{path}:{lineno}: expected at least {needed + 1} fields, got {len(parts)}")
            user, item = parts[fmt.user_col].strip(), parts[fmt.item_col].strip()
            if not user or not item:
                raise IngestError(f"{path}:{lineno}: empty user or item id")
            try:
                ts = float(parts[fmt.time_col])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-numeric timestamp {parts[fmt.time_col]!r}") from None
            if not math.isfinite(ts):
                raise IngestError(f"{path}:{lineno}: timestamp is not finite")
            raw_users.append(user)
            raw_items.append(item)
            times.append(ts)
    if not raw_users:
        raise IngestError(f"{path}: no interactions found")

    user_ids = _sort_key_ids(set(raw_users))
    item_ids = _sort_key_ids(set(raw_items))
    user_index = {raw: k for k, raw in enumerate(user_ids)}
    item_index = {raw: k for k, raw in enumerate(item_ids)}
    users = np.fromiter((user_index[u] for u in raw_users), dtype=np.int64, count=len(raw_users))
    items = np.fromiter((item_index[i] for i in raw_items), dtype=np.int64, count=len(raw_items))
    users, items, timestamps = _dedup_sorted(users, items, np.asarray(times, dtype=np.float64))
    return InteractionLog(users, items, timestamps, len(user_ids), len(item_ids), user_index, item_index)


def _fold_counts(k: int, ratios) -> tuple[int, int, int]:
    if k < 3:
        return k, 0, 0
    n_val = max(1, int(math.floor(k * ratios[1] + 0.5)))
    n_test = max(1, int(math.floor(k * ratios[2] + 0.5)))
    n_train = k - n_val - n_test
    if n_train < 1:
        n_train, n_val, n_test = 1, 1, k - 2
    return n_train, n_val, n_test


def split(log: InteractionLog, ratios=(0.8, 0.1, 0.1), seed: int = 0,
          strategy: str = "random-per-user") -> DatasetSplit:
    """Per-user train/validation/test partition over distinct (user, item) pairs.

    Repeated interactions with the same item always land in the same fold.
    ``temporal-per-user`` holds out each user's most recent pairs (by first
    interaction time); ``random-per-user`` permutes them with ``seed``.
    Users with fewer than three pairs keep everything in train.
    """
    if len(log) == 0:
        raise IngestError("cannot split an empty log")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise IngestError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    if strategy not in ("random-per-user", "temporal-per-user"):
        raise IngestError(f"unknown split strategy {strategy!r}")

    # first occurrence of each (user, item) pair; log is time-sorted already
    pair_key = log.users * log.n + log.items
    uniq_keys, first_pos, inverse = np.unique(pair_key, return_index=True, return_inverse=True)
    pair_users = uniq_keys // log.n
    pair_time = log.timestamps[first_pos]
    pair_items = uniq_keys % log.n

    # pairs grouped by user, each group in (time, item) order
    order = np.lexsort((pair_items, pair_time, pair_users))
    bounds = np.searchsorted(pair_users[order], np.arange(log.m + 1))
    fold = np.zeros(uniq_keys.shape[0], dtype=np.int8)
    rng = np.random.default_rng(seed)
    for u in range(log.m):
        group = order[bounds[u]:bounds[u + 1]]
        if group.size == 0:
            continue
        n_train, n_val, _ = _fold_counts(group.size, ratios)
        if strategy == "random-per-user":
            group = group[rng.permutation(group.size)]
        fold[group[n_train:n_train + n_val]] = 1
        fold[group[n_train + n_val:]] = 2

    row_fold = fold[inverse]
    return DatasetSplit(
        train=log.subset(row_fold == 0),
        validation=log.subset(row_fold == 1),
        test=log.subset(row_fold == 2),
        seed=seed,
        strategy=strategy,
    )


def write_split_manifest(ds: DatasetSplit, path) -> None:
    """Text listing of (user, item, fold) over distinct pairs, dense ids."""
    rows = []
    for name, log in (("train", ds.train), ("validation", ds.validation), ("test", ds.test)):
        rows.extend((u, i, name) for u, i in log.pairs())
    rows.sort()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user\titem\tfold\n")
        for u, i, name in rows:
            fh.write(f"{u}\t{i}\t{name}\n")


def build_interaction_matrix(train: InteractionLog) -> sp.csr_matrix:
    """Binary m x n CSR matrix over the full entity index."""
    data = np.ones(len(train), dtype=np.float64)
    X = sp.csr_matrix((data, (train.users, train.items)), shape=(train.m, train.n))
    X.sum_duplicates()
    X.data[:] = 1.0
    X.sort_indices()
    return X


def build_user_sequences(train: InteractionLog) -> list[np.ndarray]:
    """Per-user item arrays ordered by timestamp, ties by item id."""
    order = np.lexsort((train.items, train.timestamps, train.users))
    users = train.users[order]
    items = train.items[order]
    bounds = np.searchsorted(users, np.arange(train.m + 1))
    return [items[bounds[u]:bounds[u + 1]].copy() for u in range(train.m)]


def sequences_to_csr(seqs) -> tuple[np.ndarray, np.ndarray]:
    """Flatten sequences into (indptr, items) arrays."""
    lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    items = np.concatenate([np.asarray(s, dtype=np.int64) for s in seqs]) if seqs else np.empty(0, np.int64)
    return indptr, items.astype(np.int64, copy=False)
