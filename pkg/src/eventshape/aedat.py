"""AEDAT 1.0 / 2.0 reading and writing, plus dataset directory loaders.

Record layout (big-endian):

* 2.0: 32-bit address, 32-bit timestamp in microseconds (8 bytes)
* 1.0: 16-bit address, 32-bit timestamp (6 bytes)

DVS128 address decode: bit 0 polarity (1 = ON), bits 1-7 x, bits 8-14 y.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import Counter
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .events import DVS_HEIGHT, DVS_WIDTH, OFF, ON, EventStream

log = logging.getLogger(__name__)

HEADER_END = b"#End Of ASCII Header\r\n"
_VERSION_RE = re.compile(rb"^#!AER-DAT(\d+\.\d+)")

_RECORD_DTYPES = {
    "1.0": np.dtype([("addr", ">u2"), ("ts", ">u4")]),
    "2.0": np.dtype([("addr", ">u4"), ("ts", ">u4")]),
}


class AedatError(ValueError):
    pass


def _split_header(data: bytes):
    """Return (version or None, comment lines, payload offset)."""
    pos = 0
    version = None
    comments = []
    while pos < len(data) and data[pos:pos + 1] == b"#":
        nl = data.find(b"\n", pos)
        end = len(data) if nl < 0 else nl + 1
        line = data[pos:end]
        m = _VERSION_RE.match(line)
        if m:
            version = m.group(1).decode()
            if version not in _RECORD_DTYPES:
                raise AedatError(f"unsupported AEDAT version {version}")
        else:
            comments.append(line.rstrip(b"\r\n").decode("latin-1"))
        pos = end
        # an explicit terminator protects payloads whose first byte is '#'
        if line == HEADER_END:
            break
    return version, comments, pos


def decode_address(addr: np.ndarray):
    addr = np.asarray(addr, dtype=np.int64)
    p = np.where(addr & 1, ON, OFF)
    x = (addr >> 1) & 0x7F
    y = (addr >> 8) & 0x7F
    return x, y, p


def encode_address(x, y, p) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    p = np.asarray(p, dtype=np.int64)
    if len(x) and (x.min() < 0 or x.max() > 0x7F or y.min() < 0 or y.max() > 0x7F):
        raise AedatError("coordinates do not fit the DVS128 address layout")
    return (y << 8) | (x << 1) | (p > 0).astype(np.int64)


def parse_aedat(data: bytes, version: Optional[str] = None) -> EventStream:
    """Decode an AEDAT byte string into an :class:`EventStream`.

    ``version`` is only used when the header has no ``#!AER-DAT`` line
    (default then is 2.0). Decreasing timestamps are stably re-sorted and the
    number of moved events is stored in ``stream.info["reordered"]``.
    """
    hdr_version, comments, offset = _split_header(data)
    version = hdr_version or version or "2.0"
    if version not in _RECORD_DTYPES:
        raise AedatError(f"unsupported AEDAT version {version}")
    dtype = _RECORD_DTYPES[version]
    payload = len(data) - offset
    if payload % dtype.itemsize:
        bad = offset + (payload // dtype.itemsize) * dtype.itemsize
        raise AedatError(f"truncated record at byte offset {bad}")
    rec = np.frombuffer(data, dtype=dtype, offset=offset)
    x, y, p = decode_address(rec["addr"])
    t = rec["ts"].astype(np.int64)
    reordered = 0
    if len(t) > 1 and np.any(np.diff(t) < 0):
        order = np.argsort(t, kind="stable")
        reordered = int(np.count_nonzero(order != np.arange(len(t))))
        x, y, t, p = x[order], y[order], t[order], p[order]
        log.warning("re-sorted %d events with decreasing timestamps", reordered)
    info = {"version": version, "comments": comments, "reordered": reordered}
    return EventStream(x, y, t, p, DVS_WIDTH, DVS_HEIGHT, info=info)


def write_aedat(stream: EventStream, version: str = "2.0", comments: Iterable[str] = ()) -> bytes:
    """Encode a stream; inverse of :func:`parse_aedat` for the same version."""
    if version not in _RECORD_DTYPES:
        raise AedatError(f"unsupported AEDAT version {version}")
    if len(stream) and (stream.t.min() < 0 or stream.t.max() > 0xFFFFFFFF):
        raise AedatError("timestamp does not fit in 32 bits")
    header = [f"#!AER-DAT{version}\r\n".encode()]
    header += [f"# {c}\r\n".encode("latin-1") for c in comments]
    header.append(HEADER_END)
    rec = np.empty(len(stream), dtype=_RECORD_DTYPES[version])
    rec["addr"] = encode_address(stream.x, stream.y, stream.p)
    rec["ts"] = stream.t
    return b"".join(header) + rec.tobytes()


def read_aedat(path: Union[str, Path], version: Optional[str] = None) -> EventStream:
    path = Path(path)
    stream = parse_aedat(path.read_bytes(), version)
    stream.info["source"] = str(path)
    return stream


def save_aedat(path: Union[str, Path], stream: EventStream, version: str = "2.0") -> None:
    Path(path).write_bytes(write_aedat(stream, version))


# ---------------------------------------------------------------- datasets

SUITS = ("heart", "club", "diamond", "spade")
AEDAT_SUFFIXES = (".aedat", ".dat")

# the 'i' inversion marker as a standalone token of the file stem
DEFAULT_INVERTED_PATTERN = r"(?:^|[^a-z0-9])i(?:$|[^a-z0-9])"


def classify_filename(stem: str, aliases: Optional[dict] = None,
                      inverted_pattern: str = DEFAULT_INVERTED_PATTERN):
    """Return ``(class, inverted)`` from a file stem, or None if no class matches.

    ``aliases`` maps each class to substrings that identify it; the default is
    the class name itself.
    """
    aliases = aliases or {c: [c] for c in SUITS}
    low = stem.lower()
    hits = [c for c, subs in aliases.items() if any(s.lower() in low for s in subs)]
    if len(hits) != 1:
        return None
    return hits[0], re.search(inverted_pattern, low) is not None


def _aedat_files(directory: Path):
    return sorted(f for f in directory.iterdir() if f.suffix.lower() in AEDAT_SUFFIXES)


def load_poker2015(directory, aliases: Optional[dict] = None,
                   inverted_pattern: str = DEFAULT_INVERTED_PATTERN):
    """Load the per-sample 2015 Poker-DVS files.

    Returns a list of ``(stream, class, inverted)`` sorted by filename. Files
    whose name matches no (or several) classes are skipped with a warning.
    """
    directory = Path(directory)
    samples = []
    skipped = 0
    for f in _aedat_files(directory):
        parsed = classify_filename(f.stem, aliases, inverted_pattern)
        if parsed is None:
            log.warning("skipping %s: cannot infer class from filename", f.name)
            skipped += 1
            continue
        cls, inv = parsed
        stream = read_aedat(f)
        stream.label = cls
        stream.info["inverted"] = inv
        samples.append((stream, cls, inv))
    census = Counter(c for _, c, _ in samples)
    inverted = Counter(c for _, c, i in samples if i)
    log.info("loaded %d samples (%d skipped): %s", len(samples), skipped,
             ", ".join(f"{c}={census[c]} ({inverted[c]} inverted)" for c in sorted(census)))
    return samples


_MNIST_RE = re.compile(r"mnist_(\d)_scale0*(\d+)_(\d+)", re.IGNORECASE)


def load_mnist_dvs(directory, scale: int = 4, limit: Optional[int] = None):
    """Load MNIST-DVS recordings of one scale as ``(stream, digit)`` pairs.

    Files are found recursively by the ``mnist_<digit>_scale<NN>_<id>`` naming
    scheme. ``limit`` takes an evenly spread per-digit subsample.
    """
    files = []
    for f in sorted(Path(directory).rglob("*")):
        m = _MNIST_RE.search(f.name)
        if m and f.suffix.lower() in AEDAT_SUFFIXES and int(m.group(2)) == scale:
            files.append((f, m.group(1)))
    if limit is not None:
        by_digit: dict = {}
        for f, d in files:
            by_digit.setdefault(d, []).append((f, d))
        per = max(1, limit // max(1, len(by_digit)))
        files = [x for d in sorted(by_digit) for x in by_digit[d][:per]]
    out = []
    for f, d in files:
        s = read_aedat(f)
        s.label = d
        out.append((s, d))
    return out


def concatenate_samples(streams, gap_us: int = 0):
    """Join sample streams into one time-ordered stream.

    Returns ``(stream, boundaries, labels)`` where ``boundaries[k]`` is the
    start index of sample ``k`` (plus a final end index).
    """
    xs, ys, ts, ps, bounds, labels = [], [], [], [], [0], []
    offset = 0
    for s in streams:
        if len(s):
            t = s.t - s.t[0] + offset
            offset = int(t[-1]) + 1 + gap_us
        else:
            t = s.t
        xs.append(s.x)
        ys.append(s.y)
        ts.append(t)
        ps.append(s.p)
        bounds.append(bounds[-1] + len(s))
        labels.append(s.label)
    if not xs:
        return EventStream.empty(), [0], []
    joined = EventStream(np.concatenate(xs), np.concatenate(ys), np.concatenate(ts),
                         np.concatenate(ps))
    return joined, bounds, labels


def load_labeled_sequence(directory, aliases: Optional[dict] = None):
    """Load per-symbol files (original Poker-DVS layout) as one continuous stream.

    Returns ``(stream, boundaries, labels)``; see :func:`concatenate_samples`.
    """
    streams = []
    for f in _aedat_files(Path(directory)):
        parsed = classify_filename(f.stem, aliases)
        if parsed is None:
            log.warning("skipping %s: cannot infer class from filename", f.name)
            continue
        s = read_aedat(f)
        s.label = parsed[0]
        streams.append(s)
    return concatenate_samples(streams)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory, out_path) -> dict:
    directory = Path(directory)
    manifest = {str(f.relative_to(directory)): file_sha256(f)
                for f in sorted(directory.rglob("*")) if f.is_file()}
    Path(out_path).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def verify_manifest(directory, manifest_path) -> list[str]:
    """Return the relative paths that are missing or whose checksum differs."""
    directory = Path(directory)
    manifest = json.loads(Path(manifest_path).read_text())
    bad = []
    for rel, digest in manifest.items():
        f = directory / rel
        if not f.is_file() or file_sha256(f) != digest:
            bad.append(rel)
    return bad
