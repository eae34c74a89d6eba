"""Recover driving-style indicators from simulation logs.

estimate_ccg inverts the curve-cutting rule: over cornering samples the
curve-inside-signed lane offset is regressed on |a_y|, whose slope and
intercept are the style's ccg and ccg0. gg_percentiles condenses a log
into the acceleration envelope numbers, and traffic_clearance measures
the lateral gap to oncoming vehicles at each pass point.
"""

from typing import NamedTuple

import numpy as np

from .errors import InsufficientDataError, NumericError, ValidationError
from .scenario import SimLog, TrafficScript

MIN_REGRESSION_SAMPLES = 10


class CcgEstimate(NamedTuple):
    ccg: float
    ccg0: float
    r_squared: float
    n_samples: int


def estimate_ccg(
    log: SimLog,
    k_min: float = 0.002,
    exclude_traffic: bool = True,
    settle_time: float = 1.5,
    release_time: float = 3.0,
) -> CcgEstimate:
    """Least-squares fit of curve-inside-signed offset against |a_y|.

    The curve-cutting rule describes stationary cornering, so only
    quasi-stationary samples qualify: |k| >= k_min and curvature within
    5% of its value settle_time seconds earlier, which drops the
    transition spirals and the settling right after them. Samples with an
    oncoming vehicle in preview (d_traffic >= 0), and the release_time
    tail after it, are dropped when exclude_traffic is set, since the
    traffic shift overrides curve cutting there.
    """
    if k_min <= 0.0:
        raise ValidationError("k_min must be > 0")
    if len(log) < 2:
        raise InsufficientDataError("log too short")
    dt = float(np.median(np.diff(log.t)))
    mask = np.abs(log.k) >= k_min
    w = int(round(settle_time / dt))
    if w > 0:
        steady = np.zeros(len(log), dtype=bool)
        steady[w:] = np.abs(log.k[w:] - log.k[:-w]) <= 0.05 * np.abs(log.k[w:])
        mask &= steady
    if exclude_traffic:
        idx = np.arange(len(log))
        last_active = np.maximum.accumulate(np.where(log.d_traffic >= 0.0, idx, -1))
        wr = int(round(release_time / dt))
        mask &= (last_active < 0) | (idx - last_active > wr)
    n = int(mask.sum())
    if n < MIN_REGRESSION_SAMPLES:
        raise InsufficientDataError(
            f"only {n} cornering samples (need {MIN_REGRESSION_SAMPLES})"
        )
    x = np.abs(log.a_y[mask])
    y = np.sign(log.k[mask]) * log.d_cl_actual[mask]
    x_mean = float(x.mean())
    y_mean = float(y.mean())
    sxx = float(((x - x_mean) ** 2).sum())
    if sxx == 0.0:
        raise NumericError("degenerate regression: |a_y| has zero variance")
    sxy = float(((x - x_mean) * (y - y_mean)).sum())
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    syy = float(((y - y_mean) ** 2).sum())
    if syy == 0.0:
        r2 = 1.0  # constant offset fits exactly
    else:
        r2 = sxy * sxy / (sxx * syy)
    return CcgEstimate(ccg=slope, ccg0=intercept, r_squared=r2, n_samples=n)


class GgPercentiles(NamedTuple):
    ax_max_p: float
    ax_min_p: float
    ay_max_p: float


def gg_percentiles(log: SimLog, percentile: float) -> GgPercentiles:
    """Percentiles of the realized acceleration envelope.

    ax_max_p is taken over the accelerating samples (a_x > 0), ax_min_p
    over the braking samples by magnitude with the sign restored, and
    ay_max_p over |a_y|. Percentiles interpolate linearly between closest
    ranks.
    """
    if not (0.0 <= percentile <= 100.0):
        raise ValidationError("percentile must be in [0, 100]")
    pos = log.a_x[log.a_x > 0.0]
    neg = log.a_x[log.a_x < 0.0]
    if pos.size == 0:
        raise InsufficientDataError("no accelerating samples in log")
    if neg.size == 0:
        raise InsufficientDataError("no braking samples in log")
    return GgPercentiles(
        ax_max_p=float(np.percentile(pos, percentile)),
        ax_min_p=-float(np.percentile(-neg, percentile)),
        ay_max_p=float(np.percentile(np.abs(log.a_y), percentile)),
    )


def gg_means(log: SimLog) -> GgPercentiles:
    """Arithmetic-mean variant of gg_percentiles (same partitions)."""
    pos = log.a_x[log.a_x > 0.0]
    neg = log.a_x[log.a_x < 0.0]
    if pos.size == 0:
        raise InsufficientDataError("no accelerating samples in log")
    if neg.size == 0:
        raise InsufficientDataError("no braking samples in log")
    return GgPercentiles(
        ax_max_p=float(pos.mean()),
        ax_min_p=float(neg.mean()),
        ay_max_p=float(np.abs(log.a_y).mean()),
    )


def traffic_clearance(
    log: SimLog, script: TrafficScript, lane_width: float = 3.0
) -> list:
    """Minimum lateral gap toward the opposing lane, one value per
    scripted encounter, measured at the pass point (the last tick with
    the actor still ahead).

    The gap is lane_width - d_cl_actual: a rightward (negative) offset
    increases clearance.
    """
    if lane_width <= 0.0:
        raise ValidationError("lane_width must be > 0")
    active = log.d_traffic >= 0.0
    # contiguous runs of active observation, one per encounter
    starts = np.where(active & ~np.roll(active, 1))[0]
    ends = np.where(active & ~np.roll(active, -1))[0]
    if active[0]:
        starts = np.concatenate(([0], starts[starts != 0]))
    if active[-1]:
        raise ValidationError("log ends during an encounter")
    n_runs = len(starts)
    if n_runs != len(script.encounters):
        raise ValidationError(
            f"log shows {n_runs} encounters, script has {len(script.encounters)}"
        )
    return [float(lane_width - log.d_cl_actual[e]) for e in ends]
