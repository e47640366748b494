"""Node geography, grid-cell location codes, drift detection and CGF scoring."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple

from .errors import BadWeights, OutOfRegion

# geohash alphabet
_BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"


@dataclass(frozen=True)
class GeoPoint:
    x: float
    y: float

    def as_tuple(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle; the default is the 1000 m square."""

    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1000.0
    y1: float = 1000.0

    @classmethod
    def square(cls, size: float) -> "Region":
        return cls(0.0, 0.0, float(size), float(size))

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def contains(self, p: GeoPoint) -> bool:
        return self.x0 <= p.x <= self.x1 and self.y0 <= p.y <= self.y1

    def clamp(self, p: GeoPoint) -> GeoPoint:
        return GeoPoint(min(max(p.x, self.x0), self.x1), min(max(p.y, self.y0), self.y1))


def distance(a: GeoPoint, b: GeoPoint) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def _cell(p: GeoPoint, resolution: int, region: Region) -> Tuple[int, int]:
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if not region.contains(p):
        raise OutOfRegion(f"{p} outside {region}")
    col = min(int((p.x - region.x0) / region.width * resolution), resolution - 1)
    row = min(int((p.y - region.y0) / region.height * resolution), resolution - 1)
    return col, row


def encode_csc(p: GeoPoint, resolution: int, region: Region = Region()) -> str:
    """Fixed-length cell code for the grid cell containing ``p``.

    Column and row bits are interleaved (geohash style) and written in
    base32; the code length depends only on ``resolution``.
    """
    col, row = _cell(p, resolution, region)
    bits = max(1, (resolution - 1).bit_length())
    value = 0
    for i in reversed(range(bits)):
        value = (value << 2) | (((col >> i) & 1) << 1) | ((row >> i) & 1)
    length = max(1, math.ceil(2 * bits / 5))
    chars = []
    for _ in range(length):
        chars.append(_BASE32[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def decode_csc(code: str, resolution: int, region: Region = Region()) -> Region:
    """Bounding box of the cell a code names."""
    value = 0
    for ch in code:
        value = (value << 5) | _BASE32.index(ch)
    bits = max(1, (resolution - 1).bit_length())
    col = row = 0
    for i in range(bits):
        row |= ((value >> (2 * i)) & 1) << i
        col |= ((value >> (2 * i + 1)) & 1) << i
    if col >= resolution or row >= resolution:
        raise ValueError(f"code {code!r} is not a cell of a {resolution}x{resolution} grid")
    w = region.width / resolution
    h = region.height / resolution
    return Region(region.x0 + col * w, region.y0 + row * h, region.x0 + (col + 1) * w, region.y0 + (row + 1) * h)


class LocationHistory:
    """Bounded record of ``(time, point)`` samples with strictly increasing times."""

    def __init__(self, capacity: int = 32, samples: Iterable = ()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._samples = deque(maxlen=capacity)
        for t, p in samples:
            self.record(t, p)

    def record(self, time, point: GeoPoint):
        if self._samples and time <= self._samples[-1][0]:
            raise ValueError(f"sample time {time} not after {self._samples[-1][0]}")
        self._samples.append((time, point))

    def latest(self) -> Optional[Tuple[float, GeoPoint]]:
        return self._samples[-1] if self._samples else None

    def window(self, duration, now=None):
        if not self._samples:
            return []
        end = self._samples[-1][0] if now is None else now
        return [(t, p) for t, p in self._samples if t >= end - duration]

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)


def drift_exceeded(history: LocationHistory, window, threshold: float, now=None) -> bool:
    """True iff two samples inside the trailing window are more than ``threshold`` apart."""
    if window <= 0:
        raise ValueError("window must be positive")
    points = [p for _, p in history.window(window, now)]
    for i, a in enumerate(points):
        for b in points[i + 1:]:
            if distance(a, b) > threshold:
                return True
    return False


@dataclass(frozen=True)
class Reputation:
    score: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "score", min(1.0, max(0.0, float(self.score))))


class RepEvent(str, Enum):
    PARTICIPATED_OK = "participated_ok"
    TIMED_OUT = "timed_out"
    MISBEHAVED = "misbehaved"


DEFAULT_REP_DELTAS = {
    RepEvent.PARTICIPATED_OK: 0.01,
    RepEvent.TIMED_OUT: -0.05,
    RepEvent.MISBEHAVED: -0.25,
}


def update_reputation(rep: Reputation, event, deltas=None) -> Reputation:
    deltas = deltas or DEFAULT_REP_DELTAS
    event = RepEvent(event)
    return Reputation(rep.score + deltas[event])


@dataclass(frozen=True)
class CgfScore:
    node_id: int
    reputation: float
    geographic: float
    combined: float


def check_weights(weights) -> Tuple[float, float]:
    w_r, w_d = weights
    if w_r < 0 or w_d < 0 or not math.isclose(w_r + w_d, 1.0, abs_tol=1e-9):
        raise BadWeights(f"weights must be non-negative and sum to 1, got {weights}")
    return float(w_r), float(w_d)


def cgf_score(
    rep: Reputation,
    node_loc: GeoPoint,
    anchor: GeoPoint,
    d_max: float,
    weights=(0.5, 0.5),
    node_id: int = -1,
    geo_override: Optional[float] = None,
) -> CgfScore:
    """Convex mix of reputation and proximity to the anchor.

    ``geo_override`` replaces the proximity term (a drifted node reports 0).
    """
    w_r, w_d = check_weights(weights)
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    if geo_override is None:
        geo = max(0.0, 1.0 - distance(node_loc, anchor) / d_max)
    else:
        geo = geo_override
    combined = w_r * rep.score + w_d * geo
    return CgfScore(node_id, rep.score, geo, min(1.0, max(0.0, combined)))
