"""Synthetic rating data with a planted bias/factor/taxonomy/drift structure.

Scores come from a planted model: global mean, user/item/artist biases, and
factor interactions whose item vectors follow the taxonomy (tracks sit near
their album, albums near their artist). Users rate inside one taste
community (a block of artists) whose artist directions are mutually
orthogonal, so co-rated item pairs either share real structure or share
nothing. The optional drift component mixes per-user regime switches, a
global seasonal wave, and per-item seasonal wobble, which gives time-aware
predictors a measurable edge. Splits are chronological per user: earliest
ratings train, latest test, mirroring how rating logs are cut in practice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .data import Dataset, ScoreScale, DEFAULT_SCALE
from .errors import ConfigError
from .taxonomy import ItemKind, TaxonomyGraph, build_graph

TIME_SPAN_DAYS = 150
GLOBAL_MEAN = 60.0
USER_BIAS_STD = 8.0
ITEM_BIAS_STD = 5.0
ARTIST_BIAS_STD = 6.0
FACTOR_DOT_STD = 14.0        # std of the planted factor interaction per rating
CHILD_JITTER = 0.12          # child vectors sit this fraction of the parent norm away
ARTIST_FACTOR_FRACTION = 0.7
REGIME_STD = 14.0            # per-user preference level per regime
NUM_REGIMES = 2
SEASON_AMP = 8.0             # global seasonal wave amplitude
SEASON_USER_STD = 0.4        # per-user spread of seasonal sensitivity
ITEM_SEASON_STD = 3.0
COMMUNITY_MIN_ARTISTS = 3    # artists per taste community (grows to fit ratings_per_user)


@dataclass
class SynthConfig:
    users: int
    artists: int
    albums_per_artist: int
    tracks_per_album: int
    ratings_per_user: int
    dim: int = 16
    noise: float = 8.0
    drift: bool = True
    coherent_taxonomy: bool = True
    split_train: float = 0.8
    split_valid: float = 0.1
    split_test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.users < 1:
            raise ConfigError("users must be >= 1")
        if self.artists < 1 or self.albums_per_artist < 0 or self.tracks_per_album < 0:
            raise ConfigError("taxonomy sizes must be positive")
        if self.total_items() < 1:
            raise ConfigError("no items to rate")
        if self.ratings_per_user < 1:
            raise ConfigError("ratings_per_user must be >= 1")
        if self.ratings_per_user > self.total_items():
            raise ConfigError("ratings_per_user exceeds number of items")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        fr = (self.split_train, self.split_valid, self.split_test)
        if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be >= 0 and sum to 1, got {fr}")

    def num_albums(self) -> int:
        return self.artists * self.albums_per_artist

    def num_tracks(self) -> int:
        return self.num_albums() * self.tracks_per_album

    def total_items(self) -> int:
        return self.artists + self.num_albums() + self.num_tracks()

    def items_per_artist(self) -> int:
        return 1 + self.albums_per_artist * (1 + self.tracks_per_album)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_BOOL_KEYS = {"drift", "coherent_taxonomy"}
_INT_KEYS = {"users", "artists", "albums_per_artist", "tracks_per_album",
             "ratings_per_user", "dim", "seed"}
_FLOAT_KEYS = {"noise", "split_train", "split_valid", "split_test"}


def config_from_dict(raw: dict) -> SynthConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _BOOL_KEYS:
            kwargs[key] = parse_bool(value)
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            raise ConfigError(f"unknown synth config key {key!r}")
    return SynthConfig(**kwargs)


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean from {value!r}")


@dataclass
class PlantedTruth:
    """Ground-truth parameters the generator sampled; used to validate planting."""

    mu: float
    b_u: np.ndarray
    b_i: np.ndarray
    b_a: np.ndarray
    q_node: np.ndarray
    q_artist: np.ndarray
    p_u: np.ndarray
    regime_levels: np.ndarray
    season_u: np.ndarray


def build_taxonomy(config: SynthConfig) -> TaxonomyGraph:
    """Dense ids: artists first, then albums (grouped by artist), then tracks."""
    n = config.total_items()
    kind = np.full(n, -1, dtype=np.int8)
    album_of = np.full(n, -1, dtype=np.int64)
    artist_link = np.full(n, -1, dtype=np.int64)
    kind[:config.artists] = ItemKind.ARTIST
    album_base = config.artists
    track_base = album_base + config.num_albums()
    for a in range(config.artists):
        for b in range(config.albums_per_artist):
            alb = album_base + a * config.albums_per_artist + b
            kind[alb] = ItemKind.ALBUM
            artist_link[alb] = a
            for c in range(config.tracks_per_album):
                trk = (track_base
                       + (a * config.albums_per_artist + b) * config.tracks_per_album + c)
                kind[trk] = ItemKind.TRACK
                album_of[trk] = alb
                artist_link[trk] = a
    return build_graph(kind, album_of, artist_link, {})


def community_layout(config: SynthConfig) -> np.ndarray:
    """Community index per artist; each community holds enough items that a
    user's whole rating budget fits inside it."""
    ca = max(COMMUNITY_MIN_ARTISTS,
             math.ceil(config.ratings_per_user / config.items_per_artist()))
    n_comm = max(1, config.artists // ca)
    return np.minimum(np.arange(config.artists) // ca, n_comm - 1)


def generate_synthetic(config: SynthConfig, seed: int, with_truth: bool = False):
    """Draw (train, validation, test, taxonomy) deterministically from
    (config, seed); with_truth=True appends the PlantedTruth."""
    rng = np.random.default_rng([seed, 0x5EED])
    graph = build_taxonomy(config)
    n_items = config.total_items()
    n_users = config.users
    dim = config.dim
    artist_of = graph.artist_array(n_items)
    comm_of_artist = community_layout(config)
    n_comm = int(comm_of_artist.max()) + 1

    mu = GLOBAL_MEAN
    b_u = rng.normal(0.0, USER_BIAS_STD, n_users)
    b_i = rng.normal(0.0, ITEM_BIAS_STD, n_items)
    b_a = rng.normal(0.0, ARTIST_BIAS_STD, config.artists)

    # artist directions: orthonormal within each community so that distinct
    # artists carry uncorrelated taste signals
    centers = np.zeros((config.artists, dim))
    for c in range(n_comm):
        members = np.flatnonzero(comm_of_artist == c)
        basis, _ = np.linalg.qr(rng.normal(0.0, 1.0, (dim, members.size)))
        centers[members] = basis[:, :members.size].T * FACTOR_DOT_STD
    artist_gain = rng.normal(1.0, 0.2, config.artists)
    q_artist = centers * (ARTIST_FACTOR_FRACTION * artist_gain)[:, None]

    q_node = np.empty((n_items, dim))
    q_node[:config.artists] = centers
    album_base = config.artists
    track_base = album_base + config.num_albums()
    jit = FACTOR_DOT_STD * CHILD_JITTER / math.sqrt(dim)
    if config.coherent_taxonomy:
        album_artist = graph.artist_link[album_base:track_base]
        q_node[album_base:track_base] = (
            q_node[album_artist] + rng.normal(0.0, jit, (config.num_albums(), dim)))
        track_album = graph.album_of[track_base:]
        q_node[track_base:] = (
            q_node[track_album] + rng.normal(0.0, jit, (config.num_tracks(), dim)))
    else:
        q_node[album_base:] = rng.normal(0.0, FACTOR_DOT_STD / math.sqrt(dim),
                                         (n_items - config.artists, dim))
    p_u = rng.normal(0.0, 1.0, (n_users, dim))

    season_u = rng.normal(1.0, SEASON_USER_STD, n_users)
    item_amp = rng.normal(0.0, ITEM_SEASON_STD, n_items)
    item_phase = rng.uniform(0.0, 2.0 * math.pi, n_items)
    span = TIME_SPAN_DAYS
    win_start = rng.uniform(0.0, 0.45 * span, n_users)
    win_len = rng.uniform(0.35 * span, 0.55 * span, n_users)
    cuts = np.sort(rng.uniform(0.2, 0.9, (n_users, NUM_REGIMES - 1)), axis=1)
    levels = rng.normal(0.0, REGIME_STD, (n_users, NUM_REGIMES))

    comm_items = [np.flatnonzero(comm_of_artist[artist_of] == c) for c in range(n_comm)]
    user_comm = rng.integers(0, n_comm, n_users)
    rpu = config.ratings_per_user
    all_users = np.repeat(np.arange(n_users, dtype=np.int64), rpu)
    all_items = np.empty(n_users * rpu, dtype=np.int64)
    all_times = np.empty(n_users * rpu, dtype=np.int64)
    for u in range(n_users):
        lo = u * rpu
        pool = comm_items[user_comm[u]]
        all_items[lo:lo + rpu] = pool[rng.choice(pool.size, size=rpu, replace=False)]
        t = win_start[u] + rng.uniform(0.0, win_len[u], rpu)
        all_times[lo:lo + rpu] = np.sort(np.minimum(t.astype(np.int64), span - 1))

    arts = artist_of[all_items]
    base = (mu + b_u[all_users] + b_i[all_items] + b_a[arts]
            + np.einsum("nd,nd->n", q_node[all_items] + q_artist[arts], p_u[all_users]))
    if config.drift:
        tt = all_times.astype(np.float64)
        pos = np.clip((tt - win_start[all_users]) / win_len[all_users], 0.0, 1.0)
        regime = (pos[:, None] > cuts[all_users]).sum(axis=1)
        base += levels[all_users, regime]
        base += season_u[all_users] * SEASON_AMP * np.sin(2.0 * math.pi * tt / (0.45 * span))
        base += item_amp[all_items] * np.sin(2.0 * math.pi * tt / (0.35 * span)
                                             + item_phase[all_items])
    scores = DEFAULT_SCALE.clip(base + rng.normal(0.0, config.noise, base.size))

    # chronological per-user split: earliest -> train, latest -> test
    n_va = int(round(config.split_valid * rpu))
    n_te = int(round(config.split_test * rpu))
    n_tr = rpu - n_va - n_te
    if n_tr < 0:
        raise ConfigError("split fractions leave no training data")
    sel_tr = np.zeros(n_users * rpu, dtype=bool)
    sel_va = np.zeros_like(sel_tr)
    sel_te = np.zeros_like(sel_tr)
    for u in range(n_users):
        lo = u * rpu
        sel_tr[lo:lo + n_tr] = True
        sel_va[lo + n_tr:lo + n_tr + n_va] = True
        sel_te[lo + n_tr + n_va:lo + rpu] = True

    def take(mask, split):
        return Dataset.from_arrays(all_users[mask], all_items[mask], scores[mask],
                                   all_times[mask], split=split, scale=DEFAULT_SCALE,
                                   num_users=n_users, num_items=n_items)

    result = (take(sel_tr, "train"), take(sel_va, "validation"),
              take(sel_te, "test"), graph)
    if with_truth:
        truth = PlantedTruth(mu, b_u, b_i, b_a, q_node, q_artist, p_u,
                             levels, season_u)
        return result + (truth,)
    return result
