"""Synthetic ground-truth event streams.

Two idealised sensors are simulated:

* a diameter bar rotating about the sensor centre, where every pixel whose
  centre enters the bar fires ON and every pixel it leaves fires OFF;
* a filled polygon translating at constant velocity, where a pixel fires ON
  when the leading boundary crosses its centre and OFF for the trailing one.

Both are exact (crossing times are solved analytically), so event pixels do
not depend on speed; only timestamps scale.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from typing import Optional, Union

import numpy as np

from .events import DVS_HEIGHT, DVS_WIDTH, OFF, ON, EventStream

# --------------------------------------------------------------------- shapes


def _heart_curve(t):
    x = 16 * np.sin(t) ** 3
    y = 13 * np.cos(t) - 5 * np.cos(2 * t) - 2 * np.cos(3 * t) - np.cos(4 * t)
    return x / 17.0, y / 17.0


def _heart(n=64):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    x, y = _heart_curve(t)
    return np.column_stack([x, y + 0.2])


def _spade(n=64):
    t = np.linspace(0.25, 2 * np.pi - 0.25, n)
    x, y = _heart_curve(t)
    body = np.column_stack([x, -y + 0.15])
    stem = np.array([[-0.28, -1.0], [0.28, -1.0]])
    return np.vstack([body, stem])


def _club(n=90):
    th = np.linspace(1.5 * np.pi + 0.25, 3.5 * np.pi - 0.25, n)
    r = 0.3 + 0.42 * np.abs(np.cos(1.5 * (th - np.pi / 2))) ** 0.6
    body = np.column_stack([r * np.cos(th), r * np.sin(th) + 0.15])
    stem = np.array([[-0.25, -1.0], [0.25, -1.0]])
    return np.vstack([body, stem])


def _diamond():
    return np.array([[0.0, 1.0], [-0.68, 0.0], [0.0, -1.0], [0.68, 0.0]])


def _six(n=48):
    # round belly at the bottom, tail rising on the upper right
    c, r = np.array([0.0, -0.4]), 0.55
    th = np.linspace(np.deg2rad(70), np.deg2rad(70 + 330), n)
    belly = c + r * np.column_stack([np.cos(th), np.sin(th)])
    tail = np.array([[0.55, 1.0], [0.2, 1.0]])
    return np.vstack([belly, tail])


def _nine(n=48):
    return -_six(n)


def _bar():
    return np.array([[-0.15, -1.0], [0.15, -1.0], [0.15, 1.0], [-0.15, 1.0]])


# y-up unit coordinates; flipped to image rows when placed on the sensor
SHAPES = {
    "heart": _heart,
    "club": _club,
    "diamond": _diamond,
    "spade": _spade,
    "six": _six,
    "nine": _nine,
    "bar": _bar,
}


def builtin_shape(name: str) -> np.ndarray:
    try:
        return SHAPES[name]()
    except KeyError:
        raise ValueError(f"unknown built-in shape {name!r}") from None


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def place_shape(unit: np.ndarray, center, scale: float, rotation_deg: float = 0.0,
                inverted: bool = False) -> np.ndarray:
    """Map a y-up unit shape to sensor pixels (y down)."""
    a = math.radians(rotation_deg + (180.0 if inverted else 0.0))
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    p = unit @ rot.T * scale
    return np.column_stack([center[0] + p[:, 0], center[1] - p[:, 1]])


# ------------------------------------------------------------------ scenario


@dataclass(frozen=True)
class SyntheticScenario:
    """Parameters of one synthetic recording.

    ``speed`` is rad/s for the rotating bar and px/s for a translating contour.
    ``loss_cap`` (events per ``loss_bin_us``) enables the event-loss model.
    """

    kind: str = "rotating-bar"
    speed: float = 2 * math.pi
    duration: float = 1.0
    noise_rate: float = 0.0
    seed: int = 0
    shape: Union[str, tuple] = "diamond"
    direction: float = 90.0
    scale: float = 18.0
    rotation: float = 0.0
    inverted: bool = False
    start_x: float = 64.0
    start_y: float = 30.0
    bar_radius: float = 60.0
    bar_halfwidth: float = 1.5
    loss_cap: Optional[int] = None
    loss_bin_us: int = 1000
    width: int = DVS_WIDTH
    height: int = DVS_HEIGHT
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("rotating-bar", "translating-contour"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.noise_rate < 0:
            raise ValueError("noise_rate must be >= 0")

    def polygon(self) -> np.ndarray:
        unit = (builtin_shape(self.shape) if isinstance(self.shape, str)
                else np.asarray(self.shape, dtype=float))
        return place_shape(unit, (self.start_x, self.start_y), self.scale,
                           self.rotation, self.inverted)


_SCALARS = {f.name: f.type for f in fields(SyntheticScenario)}


def parse_scenario(text: str) -> SyntheticScenario:
    """Parse flat ``key = value`` text (``#`` comments allowed)."""
    kw = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed scenario line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _SCALARS:
            raise ValueError(f"unknown scenario key {key!r}")
        kw[key] = _coerce(key, val)
    return SyntheticScenario(**kw)


def _coerce(key, val):
    if key in ("kind", "label"):
        return val
    if key == "shape":
        if val.startswith("["):
            pts = np.array(json.loads(val), dtype=float)
            return tuple(map(tuple, pts))
        return val
    if key in ("seed", "width", "height", "loss_bin_us"):
        return int(val)
    if key == "loss_cap":
        return None if val.lower() in ("none", "") else int(val)
    if key == "inverted":
        return val.lower() in ("1", "true", "yes")
    return float(val)


def format_scenario(s: SyntheticScenario) -> str:
    lines = []
    for f in fields(s):
        v = getattr(s, f.name)
        if f.name == "shape" and not isinstance(v, str):
            v = json.dumps([list(p) for p in v])
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- generators


def _to_stream(times_s, x, y, p, s: SyntheticScenario, rng) -> EventStream:
    times_s = np.asarray(times_s, dtype=float)
    order = np.lexsort((y * s.width + x, times_s))
    t = np.round(times_s[order] * 1e6).astype(np.int64)
    x, y, p = x[order], y[order], p[order]
    stream = EventStream(x, y, t, p, s.width, s.height, s.label)
    if s.noise_rate > 0:
        stream = inject_noise(stream, s.noise_rate, s.duration, rng)
    if s.loss_cap is not None:
        stream = apply_event_loss(stream, s.loss_cap, s.loss_bin_us)
    return stream


def inject_noise(stream: EventStream, rate: float, duration: float, rng,
                 margin: Optional[int] = 4, track_us: Optional[int] = None) -> EventStream:
    """Merge Poisson background events (``rate`` per second) into a stream.

    Noise pixels are drawn inside the signal's bounding box padded by
    ``margin`` (as in a cropped recording); ``margin=None`` uses the whole
    sensor. With ``track_us`` the box follows the object: each noise event
    uses the bounding box of the signal events within ``track_us`` of it, the
    way a tracked crop of a moving symbol would.
    """
    n = int(rng.poisson(rate * duration))
    if n == 0:
        return stream
    t = np.round(rng.uniform(0, duration, n) * 1e6).astype(np.int64)
    if len(stream):
        t = t + int(stream.t[0])
    t.sort()
    W, H = stream.width, stream.height
    if margin is None or len(stream) == 0:
        x0 = np.zeros(n, np.int64)
        y0 = np.zeros(n, np.int64)
        x1 = np.full(n, W - 1)
        y1 = np.full(n, H - 1)
    elif track_us is None:
        x0 = np.full(n, max(0, stream.x.min() - margin))
        x1 = np.full(n, min(W - 1, stream.x.max() + margin))
        y0 = np.full(n, max(0, stream.y.min() - margin))
        y1 = np.full(n, min(H - 1, stream.y.max() + margin))
    else:
        lo = np.searchsorted(stream.t, t - track_us, side="left")
        hi = np.searchsorted(stream.t, t + track_us, side="right")
        # an empty span falls back to the nearest signal event
        lo = np.minimum(lo, len(stream) - 1)
        hi = np.maximum(hi, lo + 1)
        x0, x1, y0, y1 = (np.empty(n, np.int64) for _ in range(4))
        for k in range(n):
            xs, ys = stream.x[lo[k]:hi[k]], stream.y[lo[k]:hi[k]]
            x0[k], x1[k] = xs.min(), xs.max()
            y0[k], y1[k] = ys.min(), ys.max()
        x0, y0 = np.maximum(0, x0 - margin), np.maximum(0, y0 - margin)
        x1, y1 = np.minimum(W - 1, x1 + margin), np.minimum(H - 1, y1 + margin)
    x = rng.integers(x0, x1 + 1)
    y = rng.integers(y0, y1 + 1)
    p = np.where(rng.random(n) < 0.5, ON, OFF)
    allt = np.concatenate([stream.t, t])
    order = np.argsort(allt, kind="stable")
    return EventStream(np.concatenate([stream.x, x])[order], np.concatenate([stream.y, y])[order],
                       allt[order], np.concatenate([stream.p, p])[order],
                       stream.width, stream.height, stream.label)


def apply_event_loss(stream: EventStream, cap: int, bin_us: int) -> EventStream:
    """Keep at most ``cap`` events per ``bin_us`` slot, dropping the excess."""
    if len(stream) == 0:
        return stream
    slot = (stream.t - stream.t[0]) // bin_us
    # rank of each event inside its slot
    start = np.searchsorted(slot, slot, side="left")
    keep = (np.arange(len(slot)) - start) < cap
    return EventStream(stream.x[keep], stream.y[keep], stream.t[keep], stream.p[keep],
                       stream.width, stream.height, stream.label)


def synth_rotating_bar(s: SyntheticScenario) -> EventStream:
    """Events of a bar (a full diameter) rotating about the sensor centre."""
    if s.kind != "rotating-bar":
        raise ValueError("scenario is not a rotating bar")
    rng = np.random.default_rng(s.seed)
    cx, cy = (s.width - 1) / 2.0, (s.height - 1) / 2.0
    yy, xx = np.mgrid[0:s.height, 0:s.width]
    dx, dy = (xx - cx).ravel(), (yy - cy).ravel()
    r = np.hypot(dx, dy)
    sel = (r > s.bar_halfwidth) & (r <= s.bar_radius)
    px, py = xx.ravel()[sel], yy.ravel()[sel]
    phi = np.arctan2(dy[sel], dx[sel])
    half = np.arcsin(s.bar_halfwidth / r[sel])
    omega = s.speed
    # cut in angle rather than time so that the pixel set does not depend on speed
    total = omega * s.duration
    n_half_turns = int(math.ceil(total / math.pi)) + 1
    times, xs, ys, ps = [], [], [], []
    for ang, pol in ((phi - half, ON), (phi + half, OFF)):
        first = np.mod(ang, math.pi)
        for k in range(n_half_turns):
            phase = first + k * math.pi
            m = phase < total
            times.append(phase[m] / omega)
            xs.append(px[m])
            ys.append(py[m])
            ps.append(np.full(m.sum(), pol))
    return _to_stream(np.concatenate(times), np.concatenate(xs), np.concatenate(ys),
                      np.concatenate(ps), s, rng)


def synth_translating_contour(s: SyntheticScenario) -> EventStream:
    """Events of a filled polygon translating at ``speed`` px/s along ``direction``.

    ``direction`` is in degrees in sensor coordinates (0 = +x, 90 = +y/down).
    Edges parallel to the motion never cross a pixel centre and stay silent.
    """
    if s.kind != "translating-contour":
        raise ValueError("scenario is not a translating contour")
    rng = np.random.default_rng(s.seed)
    poly = s.polygon()
    edges = np.roll(poly, -1, axis=0) - poly
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if len(poly) < 2 or lengths.sum() == 0:
        raise ValueError("degenerate (zero-length) contour")
    area = signed_area(poly)
    a = math.radians(s.direction)
    vel = s.speed * np.array([math.cos(a), math.sin(a)])
    travel = vel * s.duration

    lo = np.floor(np.minimum(poly.min(0), poly.min(0) + travel)) - 1
    hi = np.ceil(np.maximum(poly.max(0), poly.max(0) + travel)) + 1
    x0, y0 = max(0, int(lo[0])), max(0, int(lo[1]))
    x1, y1 = min(s.width - 1, int(hi[0])), min(s.height - 1, int(hi[1]))
    if x0 > x1 or y0 > y1:
        return _to_stream(np.zeros(0), np.zeros(0, int), np.zeros(0, int), np.zeros(0, int), s, rng)
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    cxs, cys = xx.ravel().astype(float), yy.ravel().astype(float)

    times, xs, ys, ps = [], [], [], []
    sign = 1.0 if area >= 0 else -1.0
    for p0, d, ln in zip(poly, edges, lengths):
        if ln == 0:
            continue
        det = d[0] * vel[1] - d[1] * vel[0]
        if abs(det) < 1e-12 * ln * s.speed:
            continue  # edge parallel to motion
        rx, ry = cxs - p0[0], cys - p0[1]
        u = (rx * vel[1] - ry * vel[0]) / det
        tc = (d[0] * ry - d[1] * rx) / det
        m = (u >= 0) & (u < 1) & (tc >= 0) & (tc <= s.duration)
        if not m.any():
            continue
        outward = sign * np.array([d[1], -d[0]])
        pol = ON if outward @ vel > 0 else OFF
        times.append(tc[m])
        xs.append(xx.ravel()[m])
        ys.append(yy.ravel()[m])
        ps.append(np.full(m.sum(), pol))
    if not times:
        return _to_stream(np.zeros(0), np.zeros(0, int), np.zeros(0, int), np.zeros(0, int), s, rng)
    return _to_stream(np.concatenate(times), np.concatenate(xs), np.concatenate(ys),
                      np.concatenate(ps), s, rng)


def synthesize(s: SyntheticScenario) -> EventStream:
    if s.kind == "rotating-bar":
        return synth_rotating_bar(s)
    return synth_translating_contour(s)


# ------------------------------------------------------------------- corpora


@dataclass
class Sample:
    stream: EventStream
    label: str
    inverted: bool = False
    scenario: Optional[SyntheticScenario] = None


def shape_sample(shape: str, rng, *, inverted=False, noise_fraction=0.05,
                 direction=90.0, direction_jitter=10.0, speed=2000.0, travel=40.0,
                 scale=16.0, label=None) -> Sample:
    """One jittered pass of a built-in shape across the sensor.

    ``noise_fraction`` adds uniformly scattered events amounting to that
    fraction of the signal events.
    """
    seed = int(rng.integers(0, 2**31 - 1))
    dirn = direction + rng.uniform(-direction_jitter, direction_jitter)
    spd = speed * rng.uniform(0.8, 1.2)
    a = math.radians(dirn)
    sc = scale * rng.uniform(0.9, 1.1)
    cx, cy = 64.0 + rng.uniform(-6, 6), 64.0 + rng.uniform(-6, 6)
    half = travel / 2.0
    scen = SyntheticScenario(
        kind="translating-contour", speed=spd, duration=travel / spd, seed=seed,
        shape=shape, direction=dirn, scale=sc, rotation=rng.uniform(-5, 5),
        inverted=inverted, start_x=cx - half * math.cos(a), start_y=cy - half * math.sin(a),
        label=label or shape,
    )
    stream = synth_translating_contour(scen)
    if noise_fraction > 0 and len(stream):
        rate = noise_fraction * len(stream) / scen.duration
        # the crop follows the symbol over about two pixels of travel
        stream = inject_noise(stream, rate, scen.duration, np.random.default_rng(seed + 1),
                              track_us=int(2e6 / spd))
        scen = replace(scen, noise_rate=rate)
    stream.label = scen.label
    stream.info["inverted"] = inverted
    return Sample(stream, scen.label, inverted, scen)


def suit_corpus(n_per_class: int = 5, seed: int = 0, noise_fraction: float = 0.05,
                **kw) -> list[Sample]:
    """Upright poker suits, classes interleaved so any prefix is balanced."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_per_class):
        for cls in ("heart", "club", "diamond", "spade"):
            out.append(shape_sample(cls, rng, noise_fraction=noise_fraction, **kw))
    return out


POKER2015_CENSUS = {"club": (30, 13), "diamond": (43, 8), "heart": (23, 0), "spade": (35, 10)}


def poker2015_corpus(seed: int = 0, census: Optional[dict] = None,
                     noise_fraction: float = 0.05, **kw) -> list[Sample]:
    """Per-sample suits following the 2015 Poker-DVS class/inversion census."""
    census = census or POKER2015_CENSUS
    rng = np.random.default_rng(seed)
    out = []
    for cls in sorted(census):
        total, n_inv = census[cls]
        for i in range(total):
            out.append(shape_sample(cls, rng, inverted=i < n_inv,
                                    noise_fraction=noise_fraction, **kw))
    return out


def digit_corpus(n_per_class: int = 10, seed: int = 0, noise_fraction: float = 0.02,
                 **kw) -> list[Sample]:
    """'six' and 'nine' (its 180 degree rotation) moving in random directions.

    With isotropic motion a 9 is exactly an inverted 6, so only a descriptor
    that sees vertical orientation can separate the classes.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_per_class):
        for cls in ("six", "nine"):
            d = rng.uniform(0, 360)
            out.append(shape_sample(cls, rng, direction=d, direction_jitter=0,
                                    noise_fraction=noise_fraction, **kw))
    return out
