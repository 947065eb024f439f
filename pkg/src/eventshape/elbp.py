"""Extended local binary patterns: 8-neighbour connectivity codes of events.

A raw code sets bit ``i`` when the ``i``-th neighbour (clockwise from the
top-left one) holds the same map value as the centre pixel. Codes are
grouped by circular rotation into 36 classes, numbered by the descending
list of class representatives below; each class carries a connectivity tag
and a weight used to down-weight isolated or blob-like events.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .events import AccumulationMap, Event, EventWindow, accumulate_direction, accumulate_polarity

# class id k (1-based) is REPRESENTATIVES[k - 1]
REPRESENTATIVES = (
    255, 254, 252, 250, 248, 246, 244, 242, 240,
    238, 236, 234, 232, 230, 228, 226, 224, 214,
    212, 210, 208, 204, 202, 200, 198, 196, 194,
    192, 170, 168, 164, 136, 132, 130, 128, 0,
)
N_CLASSES = len(REPRESENTATIVES)

# (dx, dy) clockwise from top-left; y grows downwards
NEIGHBOR_OFFSETS = ((-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0))

TAG_WEIGHTS = {"LINE": 1.0, "FILL": 0.75, "LATERAL": 0.75, "ENDPOINT": 0.5, "ISOLATE": 0.3}
TAG_CLASSES = {
    "LINE": (11, 15, 16, 18, 19, 21, 22, 24, 25, 26, 27, 32, 33, 34),
    # 14 is missing from every row of the published table; it is grouped with
    # the other 0.75-weight classes
    "FILL": (1, 2, 3, 5, 6, 9, 12, 14, 20, 23, 29, 30, 31),
    # 13 is listed under both FILL and LATERAL, same weight
    "LATERAL": (4, 7, 8, 10, 13),
    "ENDPOINT": (17, 28, 35),
    "ISOLATE": (36,),
}
ISOLATE_CLASS = 36


def rotate8(v: int, k: int) -> int:
    k %= 8
    return ((v << k) | (v >> (8 - k))) & 0xFF


def rotation_orbit(v: int) -> frozenset:
    return frozenset(rotate8(v, k) for k in range(8))


def transitions(v: int) -> int:
    """Number of 0/1 changes around the circular 8-bit string."""
    return bin(v ^ rotate8(v, 1)).count("1")


def _build_tables():
    rep_of = {}
    for cid, rep in enumerate(REPRESENTATIVES, start=1):
        for member in rotation_orbit(rep):
            if member in rep_of:
                raise AssertionError("class representatives share an orbit")
            rep_of[member] = cid
    if len(rep_of) != 256:
        raise AssertionError("class representatives do not cover all patterns")
    class_of = np.array([rep_of[v] for v in range(256)], dtype=np.int64)
    tag_of = {}
    for tag, ids in TAG_CLASSES.items():
        for cid in ids:
            tag_of[cid] = tag
    if sorted(tag_of) != list(range(1, N_CLASSES + 1)):
        raise AssertionError("weight table does not cover all 36 classes")
    weights = np.zeros(N_CLASSES + 1)
    for cid, tag in tag_of.items():
        weights[cid] = TAG_WEIGHTS[tag]
    return class_of, tag_of, weights


CLASS_OF_RAW, TAG_OF_CLASS, WEIGHT_OF_CLASS = _build_tables()
TRANSITIONS_OF_RAW = np.array([transitions(v) for v in range(256)], dtype=np.int64)


@dataclass(frozen=True)
class PatternCode:
    raw: int
    canonical: int
    transitions: int

    @property
    def representative(self) -> int:
        return REPRESENTATIVES[self.canonical - 1]

    @property
    def tag(self) -> str:
        return TAG_OF_CLASS[self.canonical]

    @property
    def weight(self) -> float:
        return float(WEIGHT_OF_CLASS[self.canonical])


def canonicalize(raw: int) -> PatternCode:
    raw = int(raw)
    if not 0 <= raw <= 255:
        raise ValueError("raw pattern must be an 8-bit value")
    return PatternCode(raw, int(CLASS_OF_RAW[raw]), int(TRANSITIONS_OF_RAW[raw]))


def weight_of(code) -> float:
    """Connectivity weight of a class id or :class:`PatternCode`."""
    cid = code.canonical if isinstance(code, PatternCode) else int(code)
    if not 1 <= cid <= N_CLASSES:
        raise ValueError(f"class id {cid} outside 1..{N_CLASSES}")
    return float(WEIGHT_OF_CLASS[cid])


def tag_of(code) -> str:
    cid = code.canonical if isinstance(code, PatternCode) else int(code)
    if not 1 <= cid <= N_CLASSES:
        raise ValueError(f"class id {cid} outside 1..{N_CLASSES}")
    return TAG_OF_CLASS[cid]


def raw_pattern(m: AccumulationMap, e: Event) -> int:
    """8-bit equality pattern of the map around ``e``'s pixel; off-grid bits are 0."""
    grid = m.grid
    centre = grid[e.y, e.x]
    if centre == 0:
        raise ValueError(f"map is empty at ({e.x}, {e.y})")
    h, w = grid.shape
    raw = 0
    for i, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        qx, qy = e.x + dx, e.y + dy
        if 0 <= qx < w and 0 <= qy < h and grid[qy, qx] == centre:
            raw |= 1 << i
    return raw


def raw_patterns(m: AccumulationMap, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised :func:`raw_pattern`; pixels whose map value is 0 get raw 0."""
    padded = np.pad(m.grid, 1)
    cx, cy = np.asarray(x) + 1, np.asarray(y) + 1
    centre = padded[cy, cx]
    raw = np.zeros(len(cx), dtype=np.int64)
    for i, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        raw |= (padded[cy + dy, cx + dx] == centre).astype(np.int64) << i
    raw[centre == 0] = 0
    return raw


@dataclass(eq=False)
class WindowCodes:
    """Per-event eLBP codes of a window."""

    raw: np.ndarray
    canonical: np.ndarray

    def __len__(self):
        return len(self.raw)

    def __getitem__(self, i) -> PatternCode:
        r = int(self.raw[i])
        return PatternCode(r, int(self.canonical[i]), int(TRANSITIONS_OF_RAW[r]))

    @property
    def weights(self) -> np.ndarray:
        return WEIGHT_OF_CLASS[self.canonical]

    @property
    def tags(self) -> list:
        return [TAG_OF_CLASS[c] for c in self.canonical]


def code_window(w: EventWindow, mode: str = "polarity", dirs: Optional[np.ndarray] = None) -> WindowCodes:
    """eLBP code of every event of ``w`` on the polarity or direction map.

    In direction mode, events without a valid direction (label 0) are coded
    as isolated (class 36).
    """
    if mode == "polarity":
        m = accumulate_polarity(w)
    elif mode == "direction":
        if dirs is None:
            raise ValueError("direction mode needs per-event directions")
        m = accumulate_direction(w, dirs)
    else:
        raise ValueError(f"unknown eLBP mode {mode!r}")
    raw = raw_patterns(m, w.x, w.y)
    canonical = CLASS_OF_RAW[raw]
    if mode == "direction":
        invalid = np.asarray(dirs) == 0
        raw = np.where(invalid, 0, raw)
        canonical = np.where(invalid, ISOLATE_CLASS, canonical)
    return WindowCodes(raw, canonical)
