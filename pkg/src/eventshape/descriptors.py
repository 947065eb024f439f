"""Window descriptors: histograms of oriented events (HOE) and event shape
context (ESC), each optionally weighted by eLBP connectivity.

HOE splits the window's bounding box at its midpoint into four quadrants,
numbered row-major (1 top-left, 2 top-right, 3 bottom-left, 4 bottom-right)
with events on a midline going to the lower-numbered side, and concatenates
one ``V``-bin direction histogram per quadrant.

ESC works in the window's (x, y, t) cloud normalised to zero mean and unit
variance per axis. For each reference event it histograms the directions of
the other events over ``R`` log-spaced distance rings (optionally split into
an upper and a lower hemisphere), then averages those per-event histograms
over the events sharing a direction. The per-direction block layout is
``[cell][ring][neighbour direction]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .events import EventWindow, spatial_bounding_box
from .orientation import OrientedWindow


def quadrant_index(w: EventWindow) -> np.ndarray:
    """0-based quadrant of every event (0 top-left .. 3 bottom-right)."""
    x0, x1, y0, y1 = spatial_bounding_box(w)
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    return (w.x > cx).astype(np.int64) + 2 * (w.y > cy).astype(np.int64)


def _direction_array(oriented) -> np.ndarray:
    if isinstance(oriented, OrientedWindow):
        return oriented.direction
    return np.asarray(oriented, dtype=np.int64)


def hoe(w: EventWindow, oriented, V: int = 4) -> np.ndarray:
    """Plain HOE, length ``4*V``; each non-empty quadrant block sums to 1."""
    out = np.zeros((4, V))
    if len(w) == 0:
        return out.ravel()
    d = _direction_array(oriented)
    q = quadrant_index(w)
    ok = d > 0
    np.add.at(out, (q[ok], d[ok] - 1), 1.0)
    total = out.sum(1)
    nz = total > 0
    out[nz] /= total[nz, None]
    return out.ravel()


def hoe_elbp(w: EventWindow, oriented, weights, V: int = 4) -> np.ndarray:
    """eLBP-weighted HOE.

    Each valid event adds its connectivity weight; a quadrant block is divided
    by the number of events in that quadrant, invalid-direction ones included,
    so block sums lie in [0, 1].
    """
    out = np.zeros((4, V))
    if len(w) == 0:
        return out.ravel()
    d = _direction_array(oriented)
    weights = np.asarray(weights, dtype=float)
    q = quadrant_index(w)
    ok = d > 0
    np.add.at(out, (q[ok], d[ok] - 1), weights[ok])
    count = np.bincount(q, minlength=4).astype(float)
    nz = count > 0
    out[nz] /= count[nz, None]
    return out.ravel()


@dataclass(frozen=True)
class RingConfig:
    """Ring layout of the shape context.

    Ring boundaries are log-uniform between ``inner`` and ``outer`` times the
    reference event's mean distance to the other events; closer or farther
    events are clamped into the first or last ring.
    """

    R: int = 5
    V: int = 4
    hemispheres: int = 1
    inner: float = 0.125
    outer: float = 2.0

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.hemispheres not in (1, 2):
            raise ValueError("hemispheres must be 1 or 2")
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    @property
    def event_length(self) -> int:
        return self.hemispheres * self.R * self.V

    @property
    def length(self) -> int:
        return self.V * self.event_length


def normalized_coordinates(w: EventWindow) -> np.ndarray:
    """(n, 3) array of x, y, t scaled to zero mean / unit variance per axis.

    An axis without spread is left at zero.
    """
    pts = np.column_stack([w.x, w.y, w.t]).astype(float)
    if len(pts) == 0:
        return pts
    pts = pts - pts.mean(0)
    sd = pts.std(0)
    nz = sd > 0
    pts[:, nz] /= sd[nz]
    pts[:, ~nz] = 0.0
    return pts


def shape_contexts(w: EventWindow, oriented, cfg: RingConfig = RingConfig(),
                   weights=None) -> np.ndarray:
    """Per-event shape contexts, shape ``(n, hemispheres*R*V)``.

    Neighbours without a valid direction are skipped. With ``weights`` each
    neighbour adds its eLBP weight instead of 1. Every (cell, ring) histogram
    is then normalised to sum 1 (empty ones stay zero).
    """
    n = len(w)
    d = _direction_array(oriented)
    out = np.zeros((n, cfg.hemispheres, cfg.R, cfg.V))
    if n < 2:
        return out.reshape(n, -1)
    z = normalized_coordinates(w)
    diff = z[None, :, :] - z[:, None, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    mean_d = dist.sum(1) / (n - 1)
    edges = mean_d[:, None] * np.geomspace(cfg.inner, cfg.outer, cfg.R + 1)[None, 1:-1]
    ring = (dist[:, :, None] >= edges[:, None, :]).sum(-1)
    if cfg.hemispheres == 2:
        cell = (diff[:, :, 1] >= 0).astype(np.int64)
    else:
        cell = np.zeros((n, n), dtype=np.int64)
    pair = (d[None, :] > 0) & ~np.eye(n, dtype=bool)
    ii, jj = np.nonzero(pair)
    inc = np.ones(len(jj)) if weights is None else np.asarray(weights, dtype=float)[jj]
    np.add.at(out, (ii, cell[ii, jj], ring[ii, jj], d[jj] - 1), inc)
    tot = out.sum(-1, keepdims=True)
    np.divide(out, tot, out=out, where=tot > 0)
    return out.reshape(n, -1)


def esc_event(i: int, w: EventWindow, oriented, cfg: RingConfig = RingConfig(),
              weights=None) -> np.ndarray:
    """Shape context of event ``i`` of the window."""
    return shape_contexts(w, oriented, cfg, weights)[i]


def esc(w: EventWindow, oriented, cfg: RingConfig = RingConfig(), weights=None) -> np.ndarray:
    """ESC descriptor: per-direction means of the event shape contexts."""
    d = _direction_array(oriented)
    S = shape_contexts(w, oriented, cfg, weights)
    blocks = []
    for v in range(1, cfg.V + 1):
        rows = S[d == v]
        blocks.append(rows.mean(0) if len(rows) else np.zeros(cfg.event_length))
    return np.concatenate(blocks) if blocks else np.zeros(0)


DESCRIPTOR_KINDS = ("hoe", "hoe+elbp4pol", "hoe+elbp4dir", "esc", "esc+elbp4pol", "esc+elbp4dir")


def describe(w: EventWindow, kind: str, oriented: OrientedWindow,
             ring: Optional[RingConfig] = None) -> np.ndarray:
    """Descriptor of one window for a named feature family."""
    from .elbp import code_window

    if kind not in DESCRIPTOR_KINDS:
        raise ValueError(f"unknown descriptor kind {kind!r}")
    V = ring.V if ring is not None else 4
    weights = None
    if kind.endswith("elbp4pol"):
        weights = code_window(w, "polarity").weights
    elif kind.endswith("elbp4dir"):
        weights = code_window(w, "direction", oriented.direction).weights
    if kind.startswith("hoe"):
        return hoe(w, oriented, V) if weights is None else hoe_elbp(w, oriented, weights, V)
    return esc(w, oriented, ring or RingConfig(), weights)


def descriptor_length(kind: str, V: int = 4, ring: Optional[RingConfig] = None) -> int:
    if kind.startswith("hoe"):
        return 4 * V
    return (ring or RingConfig(V=V)).length
