"""Per-event orientation from a local spatio-temporal plane fit.

Each event gets the plane ``t = a*x + b*y + c`` fitted by least squares to
itself and its most recent neighbours inside an ``L x L`` box. The gradient
angle ``atan2(b, a)`` is folded to ``[0, pi)`` and quantised to ``V`` labels.
Using a fixed *count* of neighbours rather than a time window keeps the
result independent of object speed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .events import Event, EventWindow

INVALID = 0
COND_LIMIT = 1e8
# slack for round-half-up at exact bin boundaries
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class OrientationConfig:
    L: int = 5
    M: int = 8
    V: int = 4
    min_neighbors: int = 3

    def __post_init__(self):
        if self.L < 3 or self.L % 2 == 0:
            raise ValueError("L must be odd and >= 3")
        if self.min_neighbors < 3 or self.M < self.min_neighbors:
            raise ValueError("need M >= min_neighbors >= 3")
        if self.V < 2:
            raise ValueError("V must be >= 2")


class OrientedEvent(NamedTuple):
    event: Event
    theta: float  # nan when invalid
    direction: int  # 0 when invalid
    amplitude: float


@dataclass(eq=False)
class OrientedWindow:
    """Orientation results for every event of a window, as parallel arrays."""

    theta: np.ndarray
    direction: np.ndarray
    amplitude: np.ndarray
    window: Optional[EventWindow] = None

    def __len__(self):
        return len(self.direction)

    def __getitem__(self, i) -> OrientedEvent:
        ev = self.window.event(i) if self.window is not None else None
        return OrientedEvent(ev, float(self.theta[i]), int(self.direction[i]),
                             float(self.amplitude[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def valid(self) -> np.ndarray:
        return self.direction != INVALID


def _solve_planes(dx, dy, dt, used):
    """Batched least squares of dt ~ a*dx + b*dy + c over the ``used`` entries.

    Arrays are (n, k); returns (coef (n, 3), ok (n,)).
    """
    w = used.astype(float)
    ones = w
    X = dx * w
    Y = dy * w
    T = dt * w
    ata = np.empty((len(dx), 3, 3))
    ata[:, 0, 0] = (X * dx).sum(1)
    ata[:, 0, 1] = ata[:, 1, 0] = (X * dy).sum(1)
    ata[:, 0, 2] = ata[:, 2, 0] = X.sum(1)
    ata[:, 1, 1] = (Y * dy).sum(1)
    ata[:, 1, 2] = ata[:, 2, 1] = Y.sum(1)
    ata[:, 2, 2] = ones.sum(1)
    atb = np.stack([(T * dx).sum(1), (T * dy).sum(1), T.sum(1)], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(ata)
    ok = np.isfinite(cond) & (cond <= COND_LIMIT)
    coef = np.full((len(dx), 3), np.nan)
    if ok.any():
        coef[ok] = np.linalg.solve(ata[ok], atb[ok][..., None])[..., 0]
    return coef, ok


def fit_plane(e: Event, neighbors: Sequence[Event], cfg: OrientationConfig = OrientationConfig()):
    """Fit ``t = a*x + b*y + c`` to ``e`` and its neighbours.

    Returns ``(theta, amplitude)`` with theta in [0, 2*pi), or None when there
    are fewer than ``cfg.min_neighbors`` neighbours or the fit is
    ill-conditioned.
    """
    if len(neighbors) < cfg.min_neighbors:
        return None
    pts = np.array([(n.x, n.y, n.t) for n in neighbors], dtype=float)
    dx = np.concatenate([[0.0], pts[:, 0] - e.x])[None, :]
    dy = np.concatenate([[0.0], pts[:, 1] - e.y])[None, :]
    dt = np.concatenate([[0.0], pts[:, 2] - e.t])[None, :]
    coef, ok = _solve_planes(dx, dy, dt, np.ones_like(dx, dtype=bool))
    if not ok[0]:
        return None
    a, b = coef[0, 0], coef[0, 1]
    return math.atan2(b, a) % (2 * math.pi), math.hypot(a, b)


def plane_coefficients(e: Event, neighbors: Sequence[Event]):
    """Raw ``(a, b, c)`` of the fit (relative to ``e``), or None if degenerate."""
    pts = np.array([(n.x, n.y, n.t) for n in neighbors], dtype=float)
    dx = np.concatenate([[0.0], pts[:, 0] - e.x])[None, :]
    dy = np.concatenate([[0.0], pts[:, 1] - e.y])[None, :]
    dt = np.concatenate([[0.0], pts[:, 2] - e.t])[None, :]
    coef, ok = _solve_planes(dx, dy, dt, np.ones_like(dx, dtype=bool))
    return tuple(coef[0]) if ok[0] else None


def quantize_direction(theta, V: int = 4):
    """Fold an orientation to [0, pi) and return its label in 1..V.

    Bins are centred on multiples of pi/V; exact boundaries round up.
    """
    width = math.pi / V
    phi = np.mod(theta, math.pi)
    q = np.floor(phi / width + 0.5 + _TIE_EPS).astype(np.int64) % V + 1
    return int(q) if np.ndim(q) == 0 else q


def select_neighbors(w: EventWindow, cfg: OrientationConfig):
    """Indices of each event's neighbours: at most ``M`` most recent events with
    ``t <= t_i`` inside the ``L x L`` box, ties going to later stream positions.

    Returns ``(idx (n, M), used (n, M))``.
    """
    n = len(w)
    h = cfg.L // 2
    x, y, t = w.x, w.y, w.t
    near = (np.abs(x[:, None] - x[None, :]) <= h) & (np.abs(y[:, None] - y[None, :]) <= h)
    mask = near & (t[None, :] <= t[:, None])
    np.fill_diagonal(mask, False)
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), t))] = np.arange(n)
    key = np.where(mask, -rank[None, :], n)
    k = min(cfg.M, max(n - 1, 0))
    if k == 0:
        return np.zeros((n, 0), dtype=np.int64), np.zeros((n, 0), dtype=bool)
    idx = np.argsort(key, axis=1, kind="stable")[:, :k]
    used = np.arange(k)[None, :] < mask.sum(1)[:, None]
    return idx, used


def orient_window(w: EventWindow, cfg: OrientationConfig = OrientationConfig()) -> OrientedWindow:
    """Orientation, direction label and amplitude for every event of ``w``.

    Only events of the window itself are used as neighbours.
    """
    n = len(w)
    theta = np.full(n, np.nan)
    amp = np.full(n, np.nan)
    direction = np.zeros(n, dtype=np.int64)
    if n == 0:
        return OrientedWindow(theta, direction, amp, w)
    idx, used = select_neighbors(w, cfg)
    enough = used.sum(1) >= cfg.min_neighbors
    if enough.any() and idx.shape[1]:
        rows = np.nonzero(enough)[0]
        nb = idx[rows]
        u = np.concatenate([np.ones((len(rows), 1), bool), used[rows]], axis=1)
        xf, yf, tf = (a.astype(float) for a in (w.x, w.y, w.t))
        dx = np.concatenate([np.zeros((len(rows), 1)), xf[nb] - xf[rows, None]], axis=1)
        dy = np.concatenate([np.zeros((len(rows), 1)), yf[nb] - yf[rows, None]], axis=1)
        dt = np.concatenate([np.zeros((len(rows), 1)), tf[nb] - tf[rows, None]], axis=1)
        coef, ok = _solve_planes(dx, dy, dt, u)
        good = rows[ok]
        a, b = coef[ok, 0], coef[ok, 1]
        theta[good] = np.mod(np.arctan2(b, a), 2 * math.pi)
        amp[good] = np.hypot(a, b)
        direction[good] = quantize_direction(theta[good], cfg.V)
    return OrientedWindow(theta, direction, amp, w)
