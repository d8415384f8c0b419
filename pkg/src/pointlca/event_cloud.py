"""Event streams: file ingestion, duration windows, fixed-size sampling and
normalisation into (x, y, t) point clouds."""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import EmptyStreamError, EventFormatError, ValidationError
from .rng import Xoshiro256

CANONICAL_MAGIC = b"EVCLOUD1"
_HEADER = struct.Struct("<8sHHQ")
_RECORD_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<u4"), ("p", "u1")])
NMNIST_SENSOR = (34, 34)
FORMATS = ("canonical-binary", "canonical-csv", "nmnist-bin")
ALLOWED_EVENTS_PER_WINDOW = (128, 256, 512, 1024)


@dataclass(frozen=True)
class Event:
    x: int
    y: int
    t: int
    polarity: bool


@dataclass
class EventStream:
    """Column-oriented event storage, sorted by timestamp."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    polarity: np.ndarray
    sensor_width: int
    sensor_height: int
    label: Optional[str] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.polarity = np.asarray(self.polarity, dtype=bool)
        n = self.t.shape[0]
        if not (self.x.shape == self.y.shape == self.polarity.shape == (n,)):
            raise ValidationError("event columns must be 1-D and of equal length")

    @classmethod
    def from_events(cls, events, sensor_width, sensor_height, label=None):
        events = list(events)
        return cls(
            x=[e.x for e in events],
            y=[e.y for e in events],
            t=[e.t for e in events],
            polarity=[e.polarity for e in events],
            sensor_width=sensor_width,
            sensor_height=sensor_height,
            label=label,
        )

    def __len__(self):
        return int(self.t.shape[0])

    def __getitem__(self, i) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), bool(self.polarity[i]))

    @property
    def events(self) -> list[Event]:
        return [self[i] for i in range(len(self))]

    def sorted(self) -> "EventStream":
        order = np.argsort(self.t, kind="stable")
        return EventStream(
            self.x[order], self.y[order], self.t[order], self.polarity[order],
            self.sensor_width, self.sensor_height, self.label,
        )

    def validate(self):
        if len(self) and (self.t.min() < 0):
            raise ValidationError("negative timestamp")
        if len(self) and (self.x.max() >= self.sensor_width or self.y.max() >= self.sensor_height):
            raise ValidationError("event coordinate outside sensor geometry")
        if np.any(np.diff(self.t) < 0):
            raise ValidationError("timestamps must be nondecreasing")


@dataclass(frozen=True)
class SamplingConfig:
    num_windows: int = 8
    events_per_window: int = 256
    target_points: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.num_windows < 1:
            raise ValidationError("num_windows must be positive")
        if self.events_per_window not in ALLOWED_EVENTS_PER_WINDOW:
            raise ValidationError(
                f"events_per_window must be one of {ALLOWED_EVENTS_PER_WINDOW}, "
                f"got {self.events_per_window}"
            )
        if self.target_points < 1:
            raise ValidationError("target_points must be positive")
        if self.num_windows * self.events_per_window < self.target_points:
            raise ValidationError("num_windows * events_per_window must be >= target_points")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass
class PointCloud:
    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValidationError(f"points must be (P, 3), got {self.points.shape}")

    def __len__(self):
        return self.points.shape[0]


# -- I/O ---------------------------------------------------------------------

def _stream_or_empty(x, y, t, p, width, height, label=None):
    if len(t) == 0:
        raise EmptyStreamError("event file holds no events")
    return EventStream(x, y, t, p, width, height, label).sorted()


def _parse_canonical_binary(data: bytes) -> EventStream:
    if len(data) < _HEADER.size:
        raise EventFormatError("truncated canonical-binary header", offset=len(data))
    magic, width, height, count = _HEADER.unpack_from(data, 0)
    if magic != CANONICAL_MAGIC:
        raise EventFormatError(f"bad magic {magic!r}", offset=0)
    body = len(data) - _HEADER.size
    expected = count * _RECORD_DTYPE.itemsize
    if body != expected:
        # Offset of the first record that is missing or incomplete.
        complete = min(body, expected) // _RECORD_DTYPE.itemsize
        raise EventFormatError(
            f"header declares {count} events but body holds {body} bytes",
            offset=_HEADER.size + complete * _RECORD_DTYPE.itemsize,
        )
    rec = np.frombuffer(data, dtype=_RECORD_DTYPE, count=count, offset=_HEADER.size)
    bad = np.flatnonzero((rec["x"] >= width) | (rec["y"] >= height) | (rec["p"] > 1))
    if bad.size:
        i = int(bad[0])
        raise EventFormatError(f"record {i} outside sensor or bad polarity",
                               offset=_HEADER.size + i * _RECORD_DTYPE.itemsize)
    return _stream_or_empty(rec["x"], rec["y"], rec["t"], rec["p"].astype(bool), width, height)


def _parse_csv(data: bytes) -> EventStream:
    text = data.decode("utf-8")
    lines = text.splitlines(keepends=True)
    offset = 0
    xs, ys, ts, ps = [], [], [], []
    for lineno, line in enumerate(lines):
        stripped = line.strip()
        start = offset
        offset += len(line.encode("utf-8"))
        if not stripped:
            continue
        if lineno == 0 and stripped.replace(" ", "") == "x,y,t,polarity":
            continue
        fields = next(csv.reader(io.StringIO(stripped)))
        try:
            if len(fields) != 4:
                raise ValueError
            x, y, t, p = (int(f) for f in fields)
            if x < 0 or y < 0 or t < 0 or p not in (0, 1):
                raise ValueError
        except ValueError:
            raise EventFormatError(f"malformed csv record {stripped!r}", offset=start) from None
        xs.append(x)
        ys.append(y)
        ts.append(t)
        ps.append(bool(p))
    if not ts:
        raise EmptyStreamError("event file holds no events")
    return _stream_or_empty(xs, ys, ts, ps, max(xs) + 1, max(ys) + 1)


def decode_nmnist(data: bytes) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Decode ATIS 5-byte records into (x, y, t, polarity) columns."""
    if len(data) % 5:
        raise EventFormatError("trailing partial nmnist record", offset=len(data) - len(data) % 5)
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 5).astype(np.int64)
    x = raw[:, 0]
    y = raw[:, 1]
    p = (raw[:, 2] >> 7).astype(bool)
    t = ((raw[:, 2] & 0x7F) << 16) | (raw[:, 3] << 8) | raw[:, 4]
    return x, y, t, p


def _parse_nmnist(data: bytes) -> EventStream:
    x, y, t, p = decode_nmnist(data)
    if t.size == 0:
        raise EmptyStreamError("event file holds no events")
    width = max(NMNIST_SENSOR[0], int(x.max()) + 1)
    height = max(NMNIST_SENSOR[1], int(y.max()) + 1)
    return _stream_or_empty(x, y, t, p, width, height)


_PARSERS = {
    "canonical-binary": _parse_canonical_binary,
    "canonical-csv": _parse_csv,
    "nmnist-bin": _parse_nmnist,
}


def load_events(path, format: str = "canonical-binary", label=None) -> EventStream:
    """Read an event file.  The result is sorted by timestamp."""
    if format not in _PARSERS:
        raise ValidationError(f"unknown event format {format!r}; expected one of {FORMATS}")
    data = Path(path).read_bytes()
    if not data:
        raise EmptyStreamError(f"{path}: empty file")
    stream = _PARSERS[format](data)
    stream.label = label
    return stream


def encode_canonical(stream: EventStream) -> bytes:
    n = len(stream)
    if stream.t.size and (stream.t.max() > 0xFFFFFFFF or stream.t.min() < 0):
        raise ValidationError("timestamps do not fit u32 microseconds")
    if stream.sensor_width > 0xFFFF or stream.sensor_height > 0xFFFF:
        raise ValidationError("sensor geometry does not fit u16")
    rec = np.empty(n, dtype=_RECORD_DTYPE)
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["t"] = stream.t
    rec["p"] = stream.polarity
    return _HEADER.pack(CANONICAL_MAGIC, stream.sensor_width, stream.sensor_height, n) + rec.tobytes()


def write_canonical(stream: EventStream, path) -> None:
    Path(path).write_bytes(encode_canonical(stream))


def write_csv(stream: EventStream, path) -> None:
    lines = ["x,y,t,polarity"]
    lines += [f"{x},{y},{t},{int(p)}" for x, y, t, p in
              zip(stream.x.tolist(), stream.y.tolist(), stream.t.tolist(), stream.polarity.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def encode_nmnist(stream: EventStream) -> bytes:
    if stream.x.size and (stream.x.max() > 255 or stream.y.max() > 255 or stream.t.max() >= 1 << 23):
        raise ValidationError("stream does not fit the ATIS 5-byte layout")
    out = np.empty((len(stream), 5), dtype=np.uint8)
    t = stream.t
    out[:, 0] = stream.x
    out[:, 1] = stream.y
    out[:, 2] = (stream.polarity.astype(np.int64) << 7) | ((t >> 16) & 0x7F)
    out[:, 3] = (t >> 8) & 0xFF
    out[:, 4] = t & 0xFF
    return out.tobytes()


# -- sampling ----------------------------------------------------------------

def assess_duration(stream: EventStream) -> int:
    """Span ``t_last - t_first`` in microseconds."""
    if len(stream) == 0:
        raise EmptyStreamError("duration of an empty stream")
    return int(stream.t.max() - stream.t.min())


def window_index(stream: EventStream, num_windows: int) -> np.ndarray:
    """Window of each event.  Windows are equal half-open slices of the
    duration; the final event falls in the last window."""
    t0 = int(stream.t.min())
    duration = assess_duration(stream)
    if duration == 0:
        return np.zeros(len(stream), dtype=np.int64)
    idx = ((stream.t - t0) * num_windows) // duration
    return np.minimum(idx, num_windows - 1)


def _nearest_nonempty(w: int, counts: np.ndarray) -> int:
    for d in range(1, counts.size):
        for cand in (w - d, w + d):  # earlier window wins ties
            if 0 <= cand < counts.size and counts[cand] > 0:
                return cand
    raise EmptyStreamError("no nonempty window")


def window_and_sample(stream: EventStream, config: SamplingConfig) -> PointCloud:
    """Fixed-size (x, y, t) cloud from an event stream.

    Each window contributes ``events_per_window`` draws (without replacement
    when it holds enough events, with replacement otherwise; an empty window
    draws from its nearest nonempty neighbour).  The draws are concatenated
    in window order, shuffled, and downsampled to ``target_points``.  When
    ``target_points >= num_windows`` the downsampling keeps at least one draw
    per window: for each window its first draw in shuffled order is kept,
    then the remaining slots go to the earliest other shuffled draws.
    """
    if len(stream) == 0:
        raise EmptyStreamError("cannot sample an empty stream")
    rng = Xoshiro256(config.seed)
    W, E = config.num_windows, config.events_per_window
    widx = window_index(stream, W)
    counts = np.bincount(widx, minlength=W)
    members = [np.flatnonzero(widx == w) for w in range(W)]

    picks = []
    for w in range(W):
        src = members[w] if counts[w] else members[_nearest_nonempty(w, counts)]
        if src.size >= E:
            chosen = src[rng.sample_without_replacement(src.size, E)]
        else:
            chosen = src[rng.sample_with_replacement(src.size, E)]
        picks.append(chosen)
    events = np.concatenate(picks)
    block = np.repeat(np.arange(W), E)

    order = np.arange(events.size)
    rng.shuffle(order)
    P = config.target_points
    if P >= W:
        keep = np.zeros(order.size, dtype=bool)
        seen = np.zeros(W, dtype=bool)
        for pos, j in enumerate(order):
            if not seen[block[j]]:
                seen[block[j]] = True
                keep[pos] = True
        spare = P - int(keep.sum())
        rest = np.flatnonzero(~keep)[:spare]
        keep[rest] = True
        selected = order[keep]
    else:
        selected = order[:P]
    ev = events[selected]
    pts = np.stack([stream.x[ev], stream.y[ev], stream.t[ev]], axis=1).astype(np.float64)
    return PointCloud(pts, label=stream.label)


NORMALIZATIONS = ("isotropic", "per-axis")


def normalize_cloud(cloud: PointCloud, mode: str = "isotropic") -> PointCloud:
    """Centre on the centroid and scale so the farthest point has norm 1.

    ``mode="per-axis"`` first divides each centred axis by its own largest
    magnitude.  Raw microsecond timestamps otherwise dwarf pixel coordinates
    and the isotropic scaling flattens the spatial axes.
    """
    if mode not in NORMALIZATIONS:
        raise ValidationError(f"normalization must be one of {NORMALIZATIONS}, got {mode!r}")
    pts = cloud.points - cloud.points.mean(axis=0)
    if mode == "per-axis" and len(pts):
        span = np.abs(pts).max(axis=0)
        pts = pts / np.where(span > 0.0, span, 1.0)
    scale = float(np.sqrt((pts * pts).sum(axis=1)).max()) if len(pts) else 0.0
    if scale > 0.0:
        pts = pts / scale
    return PointCloud(pts, label=cloud.label)


def stream_to_cloud(stream: EventStream, config: SamplingConfig, normalization="isotropic") -> PointCloud:
    return normalize_cloud(window_and_sample(stream, config), normalization)
