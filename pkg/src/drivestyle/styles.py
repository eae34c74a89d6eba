"""Driving-style parameter registry.

A style is the seven-number vector consumed by the behavior and path
following layers: the curve-cutting gradient and offset (ccg, ccg0), the
oncoming-traffic preview range and pass shift (rho_t, d_t0), and the GG
acceleration envelope (ax_max, ax_min, ay_max). Built-in styles carry the
calibrated passive/rail/sportive vectors; replay is not a parameter
vector but a recorded (s, d_cl, v) trace fed back as the control target.
"""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class StyleParams:
    """Complete parameter vector of one driving style.

    Units: ccg in m per m/s^2, ccg0/d_t0/rho_t in m, accelerations in
    m/s^2. d_t0 is the (nonpositive) lateral shift reached when passing
    an oncoming vehicle; rho_t is the distance at which the shift starts.
    """

    name: str
    ccg: float
    ccg0: float
    rho_t: float
    d_t0: float
    ax_max: float
    ax_min: float
    ay_max: float

    def __post_init__(self):
        for fld in ("ccg", "ccg0", "rho_t", "d_t0", "ax_max", "ax_min", "ay_max"):
            object.__setattr__(self, fld, float(getattr(self, fld)))
        if not self.rho_t > 0.0:
            raise ValidationError("rho_t must be > 0")
        if self.d_t0 > 0.0:
            raise ValidationError("d_t0 must be <= 0")
        if not (self.ax_min < 0.0 < self.ax_max):
            raise ValidationError("need ax_min < 0 < ax_max")
        if not self.ay_max > 0.0:
            raise ValidationError("ay_max must be > 0")


_BUILTIN = {
    "passive": StyleParams(
        name="passive",
        ccg=0.042,
        ccg0=-0.09,
        rho_t=80.0,
        d_t0=-0.218,
        ax_max=2.108,
        ax_min=-3.104,
        ay_max=3.90,
    ),
    "rail": StyleParams(
        name="rail",
        ccg=0.0,
        ccg0=0.0,
        rho_t=80.0,
        d_t0=0.0,
        ax_max=3.206,
        ax_min=-3.916,
        ay_max=4.731,
    ),
    "sportive": StyleParams(
        name="sportive",
        ccg=0.141,
        ccg0=0.135,
        rho_t=80.0,
        d_t0=-0.01,
        ax_max=4.235,
        ax_min=-4.847,
        ay_max=5.653,
    ),
}

BUILTIN_STYLE_NAMES = tuple(_BUILTIN)


def builtin_style(name: str) -> StyleParams:
    """The calibrated parameter vector for passive, rail, or sportive."""
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ValidationError(
            f"unknown style {name!r}; builtin styles are {', '.join(_BUILTIN)}"
        ) from None


def percentile(samples, q: float) -> float:
    """Percentile with linear interpolation between closest ranks."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValidationError("percentile of empty sample set")
    return float(np.percentile(arr, q))


def _pick(samples, q) -> float:
    if q == "mean" or q == 50:
        return float(np.mean(np.asarray(samples, dtype=float)))
    return percentile(samples, float(q))


def style_from_percentiles(
    ccg_samples,
    gg_samples,
    percentile_q,
    d_t0_samples=None,
    rho_t: float = 80.0,
    name: str = None,
) -> StyleParams:
    """Assemble a StyleParams from per-driver estimates.

    ccg_samples: rows of (ccg, ccg0); gg_samples: rows of (ax_max,
    ax_min, ay_max); d_t0_samples: optional per-driver pass shifts
    (default all zero, i.e. no traffic reaction). percentile_q is 15, 85,
    or 50/"mean"; 50 maps to the arithmetic mean, matching the use of the
    mean for the middle style. Signed quantities that only grow in
    magnitude (ax_min, d_t0) are ranked by magnitude with the sign
    restored, so a higher percentile always means a more pronounced
    style.
    """
    ccg_arr = np.atleast_2d(np.asarray(ccg_samples, dtype=float))
    gg_arr = np.atleast_2d(np.asarray(gg_samples, dtype=float))
    if ccg_arr.size == 0 or gg_arr.size == 0:
        raise ValidationError("empty sample set")
    if ccg_arr.shape[1] != 2:
        raise ValidationError("ccg_samples must be (ccg, ccg0) rows")
    if gg_arr.shape[1] != 3:
        raise ValidationError("gg_samples must be (ax_max, ax_min, ay_max) rows")
    if d_t0_samples is None:
        d_t0 = 0.0
    else:
        d_arr = np.asarray(d_t0_samples, dtype=float)
        if d_arr.size == 0:
            raise ValidationError("empty d_t0 sample set")
        d_t0 = -_pick(np.abs(d_arr), percentile_q)
    label = name if name is not None else f"p{percentile_q}"
    return StyleParams(
        name=label,
        ccg=_pick(ccg_arr[:, 0], percentile_q),
        ccg0=_pick(ccg_arr[:, 1], percentile_q),
        rho_t=rho_t,
        d_t0=d_t0,
        ax_max=_pick(gg_arr[:, 0], percentile_q),
        ax_min=-_pick(np.abs(gg_arr[:, 1]), percentile_q),
        ay_max=_pick(np.abs(gg_arr[:, 2]), percentile_q),
    )


def write_style(style: StyleParams, path) -> None:
    """Write the seven named fields as a JSON object."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(asdict(style), f, indent=2, sort_keys=True)
        f.write("\n")


def read_style(path) -> StyleParams:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    fields = {"name", "ccg", "ccg0", "rho_t", "d_t0", "ax_max", "ax_min", "ay_max"}
    missing = fields - raw.keys()
    if missing:
        raise ValidationError(f"style file missing fields: {sorted(missing)}")
    extra = raw.keys() - fields
    if extra:
        raise ValidationError(f"style file has unknown fields: {sorted(extra)}")
    return StyleParams(**raw)


@dataclass(frozen=True)
class ReplayTrace:
    """Recorded (s, d_cl, v) samples fed back as control targets.

    s must be strictly increasing; queries outside the recorded range
    clamp to the first/last sample.
    """

    s: tuple
    d_cl: tuple
    v: tuple

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        d = np.asarray(self.d_cl, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if not (s.size == d.size == v.size):
            raise ValidationError("trace columns must have equal length")
        if s.size < 2:
            raise ValidationError("trace needs at least two samples")
        if not np.all(np.diff(s) > 0.0):
            raise ValidationError("trace s must be strictly increasing")
        if not (
            np.all(np.isfinite(s)) and np.all(np.isfinite(d)) and np.all(np.isfinite(v))
        ):
            raise ValidationError("trace values must be finite")
        object.__setattr__(self, "s", tuple(float(x) for x in s))
        object.__setattr__(self, "d_cl", tuple(float(x) for x in d))
        object.__setattr__(self, "v", tuple(float(x) for x in v))
        # query arrays; building them per d_at call would dominate replay runs
        object.__setattr__(self, "_s_arr", s)
        object.__setattr__(self, "_d_arr", d)
        object.__setattr__(self, "_v_arr", v)

    def d_at(self, s: float) -> float:
        return float(np.interp(s, self._s_arr, self._d_arr))

    def v_at(self, s: float) -> float:
        return float(np.interp(s, self._s_arr, self._v_arr))


TRACE_CSV_HEADER = ["s", "d_cl", "v"]


def write_trace_csv(trace: ReplayTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRACE_CSV_HEADER)
        for s, d, v in zip(trace.s, trace.d_cl, trace.v):
            w.writerow([repr(s), repr(d), repr(v)])


def read_trace_csv(path) -> ReplayTrace:
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != TRACE_CSV_HEADER:
            raise ValidationError(f"trace file must start with {','.join(TRACE_CSV_HEADER)!r}")
        s, d, v = [], [], []
        for i, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"line {i}: expected 3 fields")
            try:
                s.append(float(row[0]))
                d.append(float(row[1]))
                v.append(float(row[2]))
            except ValueError as e:
                raise ValidationError(f"line {i}: {e}") from e
    return ReplayTrace(tuple(s), tuple(d), tuple(v))
