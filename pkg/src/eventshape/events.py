"""Event data model, event-count framing and 2D accumulation maps.

Streams and windows keep their events as parallel numpy arrays (``x``, ``y``,
``t``, ``p``) rather than lists of objects; :class:`Event` is only used when a
single spike is handed around.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

ON = 1
OFF = -1

DVS_WIDTH = 128
DVS_HEIGHT = 128


class Event(NamedTuple):
    x: int
    y: int
    t: int
    pol: int


def _as_arrays(x, y, t, p):
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    p = np.asarray(p, dtype=np.int64).reshape(-1)
    if not (len(x) == len(y) == len(t) == len(p)):
        raise ValueError("x, y, t and p must have the same length")
    return x, y, t, p


class _EventArrays:
    """Shared behaviour of streams and windows."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self.event(i)

    def event(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))


@dataclass(eq=False)
class EventStream(_EventArrays):
    """An ordered recording of AER events.

    ``info`` carries ingest diagnostics (e.g. the number of re-sorted events)
    and is ignored by equality.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    width: int = DVS_WIDTH
    height: int = DVS_HEIGHT
    label: Optional[str] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x, self.y, self.t, self.p = _as_arrays(self.x, self.y, self.t, self.p)

    @classmethod
    def from_events(cls, events: Sequence[Event], **kwargs) -> "EventStream":
        if len(events) == 0:
            return cls.empty(**kwargs)
        x, y, t, p = zip(*events)
        return cls(x, y, t, p, **kwargs)

    @classmethod
    def empty(cls, **kwargs) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), z.copy(), **kwargs)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.label == other.label
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.p, other.p)
        )

    def validate(self) -> None:
        """Raise ValueError if any event breaks the geometry/polarity/order invariants."""
        if len(self) == 0:
            return
        if self.x.min() < 0 or self.x.max() >= self.width:
            raise ValueError("x coordinate out of sensor range")
        if self.y.min() < 0 or self.y.max() >= self.height:
            raise ValueError("y coordinate out of sensor range")
        if not np.all(np.isin(self.p, (ON, OFF))):
            raise ValueError("polarity must be +1 or -1")
        if self.t.min() < 0:
            raise ValueError("negative timestamp")
        if np.any(np.diff(self.t) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def slice(self, start: int, stop: int) -> "EventStream":
        return EventStream(
            self.x[start:stop].copy(), self.y[start:stop].copy(),
            self.t[start:stop].copy(), self.p[start:stop].copy(),
            self.width, self.height, self.label,
        )

    def scaled_time(self, s: float) -> "EventStream":
        """Copy of the stream with every timestamp multiplied by ``s``.

        The product must stay integral; this is used to probe time-scale
        invariance, not to resample.
        """
        t = self.t * s
        if not np.allclose(t, np.round(t), rtol=0, atol=1e-9):
            raise ValueError("time scaling must map integer timestamps to integers")
        return EventStream(self.x.copy(), self.y.copy(), np.round(t).astype(np.int64),
                           self.p.copy(), self.width, self.height, self.label)


@dataclass(frozen=True)
class FramingConfig:
    N: int = 150
    B: int = 50

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 1 <= self.B <= self.N:
            raise ValueError("B must satisfy 1 <= B <= N")


@dataclass(eq=False)
class EventWindow(_EventArrays):
    """``N`` consecutive events copied out of a stream."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    start_index: int = 0
    width: int = DVS_WIDTH
    height: int = DVS_HEIGHT

    def __post_init__(self):
        self.x, self.y, self.t, self.p = _as_arrays(self.x, self.y, self.t, self.p)

    @classmethod
    def from_events(cls, events: Sequence[Event], **kwargs) -> "EventWindow":
        if len(events) == 0:
            z = np.zeros(0, dtype=np.int64)
            return cls(z, z, z, z, **kwargs)
        x, y, t, p = zip(*events)
        return cls(x, y, t, p, **kwargs)

    @property
    def duration_us(self) -> int:
        if len(self) == 0:
            return 0
        return int(self.t[-1] - self.t[0])

    def transformed(self, x=None, y=None, t=None) -> "EventWindow":
        """Copy with some coordinate arrays replaced."""
        return EventWindow(
            self.x.copy() if x is None else x,
            self.y.copy() if y is None else y,
            self.t.copy() if t is None else t,
            self.p.copy(), self.start_index, self.width, self.height,
        )


def window_starts(n_events: int, cfg: FramingConfig) -> range:
    if n_events < cfg.N:
        return range(0)
    return range(0, n_events - cfg.N + 1, cfg.B)


def frame_stream(stream: EventStream, cfg: FramingConfig) -> list[EventWindow]:
    """Slice a stream into windows of ``cfg.N`` events advancing by ``cfg.B``.

    The trailing partial window is dropped; a stream shorter than ``N`` gives
    no windows.
    """
    out = []
    for s in window_starts(len(stream), cfg):
        e = s + cfg.N
        out.append(EventWindow(
            stream.x[s:e].copy(), stream.y[s:e].copy(), stream.t[s:e].copy(),
            stream.p[s:e].copy(), start_index=s,
            width=stream.width, height=stream.height,
        ))
    return out


@dataclass(eq=False)
class AccumulationMap:
    """Per-pixel map indexed ``grid[y, x]`` (rows are sensor y)."""

    grid: np.ndarray
    kind: str

    def at(self, x: int, y: int) -> int:
        return int(self.grid[y, x])


def _last_write(w: EventWindow, values: np.ndarray) -> np.ndarray:
    grid = np.zeros((w.height, w.width), dtype=np.int64)
    if len(w) == 0:
        return grid
    flat = w.y * w.width + w.x
    # first occurrence in the reversed order is the last write
    rev = flat[::-1]
    _, first = np.unique(rev, return_index=True)
    keep = len(flat) - 1 - first
    grid.reshape(-1)[flat[keep]] = values[keep]
    return grid


def accumulate_polarity(w: EventWindow) -> AccumulationMap:
    """E_N map: +1 where the last event at a pixel was ON, -1 for OFF, 0 elsewhere."""
    return AccumulationMap(_last_write(w, w.p), "polarity")


def accumulate_direction(w: EventWindow, dirs) -> AccumulationMap:
    """D_N map: direction label of the last event at each pixel (0 = none/invalid)."""
    dirs = np.asarray(dirs, dtype=np.int64).reshape(-1)
    if len(dirs) != len(w):
        raise ValueError(f"got {len(dirs)} direction labels for {len(w)} events")
    return AccumulationMap(_last_write(w, dirs), "direction")


def spatial_bounding_box(w: EventWindow) -> tuple[int, int, int, int]:
    """Return ``(x_min, x_max, y_min, y_max)`` over the window's events."""
    if len(w) == 0:
        raise ValueError("bounding box of an empty window")
    return int(w.x.min()), int(w.x.max()), int(w.y.min()), int(w.y.max())
