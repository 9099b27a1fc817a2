"""Rating datasets: loaders, user filtering and per-user train/test splits.

A :class:`RatingDataset` stores the observed triples of a rating matrix
together with its user and item universes. Datasets produced by
:func:`split_per_user` keep the index space of their parent, so a model
trained on the train half can be queried with test-half indices directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import DataError

__all__ = [
    "RatingDataset",
    "SplitSpec",
    "load_movielens",
    "load_yahoo_r3",
    "write_movielens",
    "filter_min_ratings",
    "split_per_user",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RatingDataset:
    """Sparse user-item ratings.

    ``users`` and ``items`` are the id universes (position = dense index).
    ``user_index``, ``item_index`` and ``rating`` are parallel arrays, one
    entry per observed pair. Items or users without ratings are allowed in
    the universes; they arise when a split keeps its parent's index space.
    """

    users: tuple
    items: tuple
    user_index: np.ndarray
    item_index: np.ndarray
    rating: np.ndarray
    scale: tuple[float, float] = (1.0, 5.0)
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "user_index", _frozen(self.user_index, np.int64))
        object.__setattr__(self, "item_index", _frozen(self.item_index, np.int64))
        object.__setattr__(self, "rating", _frozen(self.rating, np.float64))
        object.__setattr__(self, "scale", (float(self.scale[0]), float(self.scale[1])))
        if not self._checked:
            self._validate()

    def _validate(self):
        n = len(self.rating)
        if not (len(self.user_index) == len(self.item_index) == n):
            raise DataError("user_index, item_index and rating must have equal length")
        if len(set(self.users)) != len(self.users):
            raise DataError("duplicate user id in universe")
        if len(set(self.items)) != len(self.items):
            raise DataError("duplicate item id in universe")
        if n == 0:
            return
        if self.user_index.min() < 0 or self.user_index.max() >= len(self.users):
            raise DataError("user_index out of range")
        if self.item_index.min() < 0 or self.item_index.max() >= len(self.items):
            raise DataError("item_index out of range")
        lo, hi = self.scale
        bad = np.flatnonzero((self.rating < lo) | (self.rating > hi))
        if bad.size:
            raise DataError(f"rating {self.rating[bad[0]]} outside scale {self.scale}")
        keys = self.user_index * len(self.items) + self.item_index
        if np.unique(keys).size != n:
            raise DataError("duplicate (user, item) entry")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_ratings(self) -> int:
        return len(self.rating)

    def __len__(self):
        return self.n_ratings

    @cached_property
    def user_pos(self) -> dict:
        return {u: k for k, u in enumerate(self.users)}

    @cached_property
    def item_pos(self) -> dict:
        return {i: k for k, i in enumerate(self.items)}

    def triples(self):
        """Iterate over ``(user_id, item_id, rating)``."""
        for u, i, r in zip(self.user_index, self.item_index, self.rating):
            yield self.users[u], self.items[i], float(r)

    def ratings_per_user(self) -> np.ndarray:
        return np.bincount(self.user_index, minlength=self.n_users)

    def ratings_per_item(self) -> np.ndarray:
        return np.bincount(self.item_index, minlength=self.n_items)

    def user_groups(self) -> list[np.ndarray]:
        """Row positions of each user's ratings, ordered by item index."""
        order = np.lexsort((self.item_index, self.user_index))
        bounds = np.searchsorted(self.user_index[order], np.arange(self.n_users + 1))
        return [order[bounds[u]:bounds[u + 1]] for u in range(self.n_users)]

    def subset(self, rows) -> "RatingDataset":
        """Same universes, only the given rating rows."""
        rows = np.asarray(rows, dtype=np.int64)
        return RatingDataset(self.users, self.items, self.user_index[rows],
                             self.item_index[rows], self.rating[rows], self.scale,
                             _checked=True)

    def dense(self, fill=np.nan) -> np.ndarray:
        """The |U| x |I| matrix R with unobserved entries set to ``fill``."""
        R = np.full((self.n_users, self.n_items), fill, dtype=np.float64)
        R[self.user_index, self.item_index] = self.rating
        return R

    def same_as(self, other: "RatingDataset") -> bool:
        return (self.users == other.users and self.items == other.items
                and self.scale == other.scale
                and np.array_equal(self.user_index, other.user_index)
                and np.array_equal(self.item_index, other.item_index)
                and np.array_equal(self.rating, other.rating))

    @classmethod
    def from_triples(cls, triples, scale=(1.0, 5.0), users=None, items=None):
        """Build a dataset from ``(user_id, item_id, rating)`` triples.

        Universes default to the sorted ids present in ``triples``.
        """
        triples = list(triples)
        if users is None:
            users = sorted({t[0] for t in triples})
        if items is None:
            items = sorted({t[1] for t in triples})
        upos = {u: k for k, u in enumerate(users)}
        ipos = {i: k for k, i in enumerate(items)}
        try:
            ui = [upos[t[0]] for t in triples]
            ii = [ipos[t[1]] for t in triples]
        except KeyError as e:
            raise DataError(f"id {e.args[0]!r} not in universe") from None
        return cls(users, items, ui, ii, [t[2] for t in triples], scale)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    seed: int = 0
    repetition_index: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.seed < 0 or self.repetition_index < 0:
            raise ValueError("seed and repetition_index must be non-negative")


def _parse_id(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def _read_tsv(path, n_fields, scale):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    triples = []
    seen = set()
    lo, hi = scale
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != n_fields:
                raise DataError(f"{path}:{lineno}: expected {n_fields} tab-separated fields, got {len(parts)}")
            try:
                r = float(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: rating {parts[2]!r} is not a number") from None
            if not lo <= r <= hi:
                raise DataError(f"{path}:{lineno}: rating {r} outside [{lo:g}, {hi:g}]")
            u, i = _parse_id(parts[0]), _parse_id(parts[1])
            if (u, i) in seen:
                raise DataError(f"{path}:{lineno}: duplicate entry for user {u}, item {i}")
            seen.add((u, i))
            triples.append((u, i, r))
    return triples


def load_movielens(path) -> RatingDataset:
    """Read a MovieLens ``u.data`` file (``user item rating timestamp``)."""
    return RatingDataset.from_triples(_read_tsv(path, 4, (1.0, 5.0)), (1.0, 5.0))


def write_movielens(dataset: RatingDataset, path, timestamp=0):
    """Write ``dataset`` in ``u.data`` layout. Ratings are written as
    integers when they are integral."""
    with open(path, "w", encoding="latin-1", newline="\n") as fh:
        for u, i, r in dataset.triples():
            rs = str(int(r)) if r.is_integer() else repr(r)
            fh.write(f"{u}\t{i}\t{rs}\t{timestamp}\n")


def load_yahoo_r3(train_path, test_path) -> tuple[RatingDataset, RatingDataset]:
    """Read the Yahoo! R3 train/test files, keeping only users in both.

    Both outputs share one index space: users are the intersection, items
    the union of items rated in either file.
    """
    train = _read_tsv(train_path, 3, (1.0, 5.0))
    test = _read_tsv(test_path, 3, (1.0, 5.0))
    shared = {t[0] for t in train} & {t[0] for t in test}
    if not shared:
        raise DataError("no user appears in both the Yahoo R3 train and test files")
    train = [t for t in train if t[0] in shared]
    test = [t for t in test if t[0] in shared]
    users = sorted(shared)
    items = sorted({t[1] for t in train} | {t[1] for t in test})
    return (RatingDataset.from_triples(train, users=users, items=items),
            RatingDataset.from_triples(test, users=users, items=items))


def filter_min_ratings(dataset: RatingDataset, threshold: int) -> RatingDataset:
    """Keep users with at least ``threshold`` ratings; re-index to the items
    those users rated."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    keep_user = dataset.ratings_per_user() >= threshold
    rows = np.flatnonzero(keep_user[dataset.user_index])
    new_users = np.flatnonzero(keep_user)
    new_items = np.unique(dataset.item_index[rows])
    umap = np.full(dataset.n_users, -1, dtype=np.int64)
    umap[new_users] = np.arange(new_users.size)
    imap = np.full(dataset.n_items, -1, dtype=np.int64)
    imap[new_items] = np.arange(new_items.size)
    return RatingDataset(
        [dataset.users[k] for k in new_users],
        [dataset.items[k] for k in new_items],
        umap[dataset.user_index[rows]],
        imap[dataset.item_index[rows]],
        dataset.rating[rows],
        dataset.scale,
        _checked=True,
    )


def n_train_for(k: int, fraction: float) -> int:
    """Train-side count for a user with ``k`` ratings (ceiling rule,
    always leaving at least one rating for test)."""
    # round() absorbs representation error, e.g. 0.6 * 50 = 30.000000000000004
    return min(k - 1, math.ceil(round(fraction * k, 9)))


def _user_rng(spec: SplitSpec, user_id):
    if isinstance(user_id, (int, np.integer)) and user_id >= 0:
        uid = [int(user_id)]
    else:
        uid = list(str(user_id).encode())
    ss = np.random.SeedSequence([spec.seed, spec.repetition_index, *uid])
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def split_per_user(dataset: RatingDataset, spec: SplitSpec) -> tuple[RatingDataset, RatingDataset]:
    """Randomly split each user's ratings into train and test.

    Each user's permutation is drawn from a counter-based generator keyed on
    ``(seed, repetition_index, user_id)``, so one user's split does not
    depend on which other users are present.
    """
    train_rows, test_rows = [], []
    for u, rows in enumerate(dataset.user_groups()):
        k = rows.size
        if k == 0:
            continue
        if k < 2:
            raise DataError(f"user {dataset.users[u]!r} has {k} rating; at least 2 are needed to split")
        perm = rows[_user_rng(spec, dataset.users[u]).permutation(k)]
        n_tr = n_train_for(k, spec.train_fraction)
        train_rows.append(np.sort(perm[:n_tr]))
        test_rows.append(np.sort(perm[n_tr:]))
    if not train_rows:
        return dataset.subset([]), dataset.subset([])
    return (dataset.subset(np.concatenate(train_rows)),
            dataset.subset(np.concatenate(test_rows)))
