"""Arc-length-parameterized road model.

A track is an ordered list of segments (straights, arcs, clothoids) with
signed curvature as a function of arc length s; positive curvature bends
left. Poses are reconstructed by integrating the heading along s, which
keeps the centerline and its heading continuous as long as adjacent
segments agree on curvature. The synthetic generator bridges every
straight-arc junction with a fixed-length clothoid so the curvature seen
by the behavior model never jumps.

Lateral offsets follow DIN 8855: positive d displaces to the left of the
travel direction.
"""

import bisect
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SEGMENT_KINDS = ("straight", "arc", "clothoid")

# Clothoid length used by the generator between a straight and an arc.
TRANSITION_LENGTH = 30.0

# Gauss-Legendre rule used for clothoid position integrals. Headings
# change by well under a radian over a transition, so 16 nodes put the
# quadrature error far below the 1e-9 pose tolerance used in tests.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class TrackSegment:
    """One homogeneous piece of road.

    kind: "straight", "arc", or "clothoid"
    length: arc length in meters, > 0
    k_start, k_end: signed curvature (1/m) at the segment ends; straights
        have both zero, arcs have both equal and nonzero, clothoids
        interpolate linearly in between.
    """

    kind: str
    length: float
    k_start: float
    k_end: float

    def __post_init__(self):
        for name in ("length", "k_start", "k_end"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.kind not in SEGMENT_KINDS:
            raise ValidationError(f"unknown segment kind {self.kind!r}")
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise ValidationError(f"segment length must be > 0, got {self.length}")
        if self.kind == "straight" and (self.k_start != 0.0 or self.k_end != 0.0):
            raise ValidationError("straight segments must have zero curvature")
        if self.kind == "arc":
            if self.k_start != self.k_end:
                raise ValidationError("arc segments must have constant curvature")
            if self.k_start == 0.0:
                raise ValidationError("arc segments must have nonzero curvature")

    def curvature(self, u: float) -> float:
        """Curvature u meters into the segment."""
        if self.k_start == self.k_end:
            return self.k_start
        return self.k_start + (self.k_end - self.k_start) * (u / self.length)


def _advance(x: float, y: float, theta: float, seg: TrackSegment, u: float):
    """Pose u meters into seg, starting from the pose at its beginning.

    Closed form for straights and arcs; Gauss-Legendre quadrature of the
    heading integral for clothoids. The returned heading is the running
    (unwrapped) heading, so it stays continuous across full loops.
    """
    if u == 0.0:
        return x, y, theta
    if seg.kind == "straight" or (seg.k_start == 0.0 and seg.k_end == 0.0):
        return x + u * math.cos(theta), y + u * math.sin(theta), theta
    if seg.kind == "arc":
        k = seg.k_start
        theta1 = theta + k * u
        return (
            x + (math.sin(theta1) - math.sin(theta)) / k,
            y - (math.cos(theta1) - math.cos(theta)) / k,
            theta1,
        )
    # clothoid: theta(t) = theta + k0*t + c*t^2/2 with c the curvature slope
    k0 = seg.k_start
    c = (seg.k_end - seg.k_start) / seg.length
    half = 0.5 * u
    t = half * (_GL_X + 1.0)
    ang = theta + k0 * t + 0.5 * c * t * t
    x1 = x + half * float(np.dot(_GL_W, np.cos(ang)))
    y1 = y + half * float(np.dot(_GL_W, np.sin(ang)))
    theta1 = theta + k0 * u + 0.5 * c * u * u
    return x1, y1, theta1


@dataclass(frozen=True)
class TrackModel:
    """Centerline model: segments plus lane geometry.

    Segment start arc lengths and start poses are precomputed once so
    curvature and pose queries are cheap inside simulation loops. The
    object is immutable after construction and safe to share.
    """

    segments: tuple
    lane_width: float = 3.0

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ValidationError("track needs at least one segment")
        if not (self.lane_width > 0.0):
            raise ValidationError("lane_width must be > 0")
        object.__setattr__(self, "segments", segments)
        starts = [0.0]
        for seg in segments:
            starts.append(starts[-1] + seg.length)
        poses = [(0.0, 0.0, 0.0)]
        for seg in segments:
            x, y, th = poses[-1]
            poses.append(_advance(x, y, th, seg, seg.length))
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "_poses", tuple(poses))

    @property
    def total_length(self) -> float:
        return self._starts[-1]

    @property
    def segment_starts(self) -> tuple:
        """Arc length at which each segment begins."""
        return self._starts[:-1]

    def _locate(self, s: float):
        if not (0.0 <= s <= self.total_length):
            raise ValidationError(
                f"arc length {s} outside track [0, {self.total_length}]"
            )
        idx = bisect.bisect_right(self._starts, s) - 1
        idx = min(idx, len(self.segments) - 1)
        return idx, s - self._starts[idx]


def curvature_at(track: TrackModel, s: float) -> float:
    """Signed centerline curvature at arc length s (positive = left)."""
    idx, u = track._locate(s)
    return track.segments[idx].curvature(u)


def pose_at(track: TrackModel, s: float, d: float = 0.0):
    """Cartesian pose (x, y, heading) of the point offset d meters from
    the centerline at arc length s; positive d is to the left.

    The heading returned is the centerline heading, unwrapped (it keeps
    growing around loops instead of jumping at +/- pi).
    """
    idx, u = track._locate(s)
    x0, y0, th0 = track._poses[idx]
    x, y, th = _advance(x0, y0, th0, track.segments[idx], u)
    if d != 0.0:
        x -= d * math.sin(th)
        y += d * math.cos(th)
    return x, y, th


def generate_track(
    length_m: float = 5000.0,
    n_curves: int = 30,
    radius_range=(80.0, 400.0),
    seed: int = 0,
    lane_width: float = 3.0,
) -> TrackModel:
    """Synthesize a rural track: alternating straights and curves.

    Each curve is clothoid + arc + clothoid with the arc radius drawn
    uniformly from radius_range and a random direction; straights fill
    the remaining length with random weights so the total length equals
    length_m exactly. Deterministic in seed.

    Raises ValidationError when the requested curves cannot fit.
    """
    if not (length_m > 0.0):
        raise ValidationError("length_m must be > 0")
    if n_curves < 0:
        raise ValidationError("n_curves must be >= 0")
    r_min, r_max = float(radius_range[0]), float(radius_range[1])
    if not (0.0 < r_min <= r_max):
        raise ValidationError("radius_range must satisfy 0 < min <= max")

    if n_curves == 0:
        return TrackModel((TrackSegment("straight", length_m, 0.0, 0.0),), lane_width)

    rng = np.random.default_rng(seed)
    radii = rng.uniform(r_min, r_max, n_curves)
    arc_lengths = rng.uniform(40.0, 90.0, n_curves)
    signs = np.where(rng.integers(0, 2, n_curves) == 1, 1.0, -1.0)
    weights = rng.uniform(0.5, 1.5, n_curves + 1)

    fixed = n_curves * 2.0 * TRANSITION_LENGTH + float(arc_lengths.sum())
    leftover = length_m - fixed
    if leftover < (n_curves + 1) * 1.0:
        raise ValidationError(
            f"{n_curves} curves need {fixed:.0f} m plus straights; "
            f"only {length_m:.0f} m available"
        )
    straights = leftover * weights / float(weights.sum())

    segments = [TrackSegment("straight", float(straights[0]), 0.0, 0.0)]
    for i in range(n_curves):
        k = float(signs[i] / radii[i])
        segments.append(TrackSegment("clothoid", TRANSITION_LENGTH, 0.0, k))
        segments.append(TrackSegment("arc", float(arc_lengths[i]), k, k))
        segments.append(TrackSegment("clothoid", TRANSITION_LENGTH, k, 0.0))
        segments.append(TrackSegment("straight", float(straights[i + 1]), 0.0, 0.0))
    return TrackModel(tuple(segments), lane_width)


TRACK_CSV_HEADER = ["kind", "length", "k_start", "k_end"]


def write_track_csv(track: TrackModel, path) -> None:
    """Write one row per segment with header kind,length,k_start,k_end."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRACK_CSV_HEADER)
        for seg in track.segments:
            w.writerow([seg.kind, repr(seg.length), repr(seg.k_start), repr(seg.k_end)])


def read_track_csv(path, lane_width: float = 3.0) -> TrackModel:
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != TRACK_CSV_HEADER:
            raise ValidationError(
                f"track file must start with {','.join(TRACK_CSV_HEADER)!r}"
            )
        segments = []
        for i, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"line {i}: expected 4 fields, got {len(row)}")
            try:
                seg = TrackSegment(row[0], float(row[1]), float(row[2]), float(row[3]))
            except ValueError as e:
                raise ValidationError(f"line {i}: {e}") from e
            segments.append(seg)
    return TrackModel(tuple(segments), lane_width)
