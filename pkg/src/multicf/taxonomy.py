"""Item hierarchy: tracks belong to albums, albums to artists, artists are roots.

Parent sets of a track may contain both its album and its artist; genre tags
are carried through the format but never feed any model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DanglingReferenceError, ParseError, TaxonomyError, UnknownIdError


class ItemKind(IntEnum):
    TRACK = 0
    ALBUM = 1
    ARTIST = 2
    GENRE = 3


_KIND_NAMES = {"track": ItemKind.TRACK, "album": ItemKind.ALBUM, "artist": ItemKind.ARTIST}
_NAME_OF = {ItemKind.TRACK: "track", ItemKind.ALBUM: "album", ItemKind.ARTIST: "artist"}


@dataclass
class TaxonomyGraph:
    """Forest over item ids with per-node kind, album/artist links and genre tags.

    kind[i] is -1 for ids absent from the graph. edge_child/edge_parent list
    every (child, parent) edge once, sorted by (child, parent).
    """

    kind: np.ndarray
    album_of: np.ndarray
    artist_link: np.ndarray
    genres: dict[int, tuple[int, ...]]
    edge_child: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    edge_parent: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    dropped_links: int = 0

    @property
    def num_nodes(self) -> int:
        return self.kind.size

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.kind.size and self.kind[i] >= 0

    def item_ids(self) -> np.ndarray:
        return np.flatnonzero(self.kind >= 0)

    def kind_of(self, i: int) -> ItemKind:
        if i not in self:
            raise UnknownIdError(f"item {i} not in taxonomy")
        return ItemKind(int(self.kind[i]))

    def artist_of(self, i: int) -> int | None:
        """Owning artist of a track or album; an artist maps to itself."""
        if i not in self:
            raise UnknownIdError(f"item {i} not in taxonomy")
        if self.kind[i] == ItemKind.ARTIST:
            return int(i)
        a = int(self.artist_link[i])
        return a if a >= 0 else None

    def parents(self, i: int) -> tuple[int, ...]:
        if i not in self:
            raise UnknownIdError(f"item {i} not in taxonomy")
        out = []
        if self.kind[i] == ItemKind.TRACK and self.album_of[i] >= 0:
            out.append(int(self.album_of[i]))
        if self.kind[i] != ItemKind.ARTIST and self.artist_link[i] >= 0:
            out.append(int(self.artist_link[i]))
        return tuple(out)

    def children(self, i: int) -> tuple[int, ...]:
        if i not in self:
            raise UnknownIdError(f"item {i} not in taxonomy")
        return tuple(int(c) for c, p in zip(self.edge_child, self.edge_parent) if p == i)

    def artist_array(self, num_items: int) -> np.ndarray:
        """Dense artist-id lookup (-1 where unknown), sized for a model."""
        out = np.full(num_items, -1, dtype=np.int64)
        n = min(num_items, self.kind.size)
        present = self.kind[:n] >= 0
        out[:n][present] = self.artist_link[:n][present]
        artists = (self.kind[:n] == ItemKind.ARTIST)
        out[:n][artists] = np.flatnonzero(artists)
        return out

    def validate(self) -> None:
        """Full-scan structural checks: symmetry, layering (hence acyclicity)."""
        edge_set = set(zip(self.edge_child.tolist(), self.edge_parent.tolist()))
        for i in self.item_ids():
            for p in self.parents(int(i)):
                if (int(i), p) not in edge_set:
                    raise TaxonomyError(f"edge ({i},{p}) missing from edge list")
        for c, p in edge_set:
            if p not in self.parents(c):
                raise TaxonomyError(f"edge ({c},{p}) not a parent link")
            if not self.kind[p] > self.kind[c]:
                raise TaxonomyError(f"edge ({c},{p}) violates track<album<artist layering")


def build_graph(kind: np.ndarray, album_of: np.ndarray, artist_link: np.ndarray,
                genres: dict[int, tuple[int, ...]], dropped: int = 0) -> TaxonomyGraph:
    edges = []
    for i in np.flatnonzero(kind >= 0):
        i = int(i)
        if kind[i] == ItemKind.TRACK and album_of[i] >= 0:
            edges.append((i, int(album_of[i])))
        if kind[i] != ItemKind.ARTIST and artist_link[i] >= 0:
            edges.append((i, int(artist_link[i])))
    edges.sort()
    ec = np.array([e[0] for e in edges], dtype=np.int64)
    ep = np.array([e[1] for e in edges], dtype=np.int64)
    return TaxonomyGraph(kind, album_of, artist_link, genres, ec, ep, dropped)


def load_taxonomy(path, strict: bool = True) -> TaxonomyGraph:
    """Parse `kind|item_id|album_id_or_NA|artist_id_or_NA|genre,genre,...` lines.

    In strict mode a reference to an undeclared (or wrong-kind) album/artist
    raises; in lenient mode the link is dropped and counted.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) != 5:
                raise ParseError(path, line_no, f"expected 5 '|' fields, got {len(parts)}")
            kind_name, id_s, alb_s, art_s, gen_s = parts
            if kind_name not in _KIND_NAMES:
                raise ParseError(path, line_no, f"unknown kind {kind_name!r}")
            try:
                item = int(id_s)
                alb = -1 if alb_s == "NA" else int(alb_s)
                art = -1 if art_s == "NA" else int(art_s)
                gens = tuple(int(g) for g in gen_s.split(",") if g)
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field: {exc}") from None
            if item < 0:
                raise ParseError(path, line_no, "negative item id")
            rows.append((line_no, _KIND_NAMES[kind_name], item, alb, art, gens))

    if not rows:
        return build_graph(np.empty(0, np.int8), np.empty(0, np.int64),
                           np.empty(0, np.int64), {})

    n = max(r[2] for r in rows) + 1
    kind = np.full(n, -1, dtype=np.int8)
    album_of = np.full(n, -1, dtype=np.int64)
    artist_link = np.full(n, -1, dtype=np.int64)
    genres: dict[int, tuple[int, ...]] = {}
    for line_no, k, item, _, _, _ in rows:
        if kind[item] >= 0:
            raise TaxonomyError(f"{path}:{line_no}: item {item} declared twice")
        kind[item] = k

    dropped = 0
    for line_no, k, item, alb, art, gens in rows:
        if gens:
            genres[item] = gens
        if k == ItemKind.ARTIST:
            if alb >= 0 or art >= 0:
                raise ParseError(path, line_no, "artists cannot have parents")
            continue
        if k == ItemKind.ALBUM and alb >= 0:
            raise ParseError(path, line_no, "albums cannot have an album parent")
        if alb >= 0:
            if alb < n and kind[alb] == ItemKind.ALBUM:
                album_of[item] = alb
            elif strict:
                raise DanglingReferenceError(
                    f"{path}:{line_no}: item {item} references undeclared album {alb}")
            else:
                dropped += 1
        if art >= 0:
            if art < n and kind[art] == ItemKind.ARTIST:
                artist_link[item] = art
            elif strict:
                raise DanglingReferenceError(
                    f"{path}:{line_no}: item {item} references undeclared artist {art}")
            else:
                dropped += 1

    # tracks with an album but no direct artist inherit the album's artist
    for line_no, k, item, alb, art, _ in rows:
        if k == ItemKind.TRACK and artist_link[item] < 0 and album_of[item] >= 0:
            artist_link[item] = artist_link[album_of[item]]

    return build_graph(kind, album_of, artist_link, genres, dropped)


def save_taxonomy(graph: TaxonomyGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in graph.item_ids():
            i = int(i)
            k = _NAME_OF[ItemKind(int(graph.kind[i]))]
            alb = "NA" if graph.album_of[i] < 0 else str(int(graph.album_of[i]))
            art = "NA" if graph.artist_link[i] < 0 else str(int(graph.artist_link[i]))
            gens = ",".join(str(g) for g in graph.genres.get(i, ()))
            fh.write(f"{k}|{i}|{alb}|{art}|{gens}\n")
