"""Reactive lateral behavior: curve cutting and oncoming-traffic shift.

The target lane offset d_cl is assembled per tick from two sources:

* curve cutting: the previewed lateral acceleration a_y = K v^2 is mapped
  through the affine rule |a_y| * ccg + ccg0 and mirrored to the curve's
  inside, so the car cuts left curves to the left and right curves to the
  right; on straights the term is zero.
* traffic shift: while an oncoming vehicle is within the preview range
  rho_t, the target shifts toward d_t0 (rightward, away from the
  opposing lane) along a linear ramp that is zero at rho_t and reaches
  d_t0 when the vehicles are abreast. The shift is rate limited so the
  offset never jumps, and releases under the same limit after the pass.

The combined target is the pointwise minimum of the two, which lets the
rightward traffic clearance dominate any leftward cutting.
"""

import math
from dataclasses import dataclass

from .errors import ValidationError
from .styles import StyleParams

# Canonical update interval of the behavior layer. The rate limiter's
# bound is defined per update step at this rate; callers running a
# different dt pass steps = dt / CONTROLLER_TICK so the per-second bound
# stays the same.
CONTROLLER_TICK = 0.01


@dataclass
class BehaviorState:
    """Mutable per-run state: the rate limiter's memory.

    d_cl_t_prev is the previous tick's (already limited) traffic shift;
    s_prev records the arc length of the previous tick for callers that
    align behavior output with log rows.
    """

    d_cl_t_prev: float = 0.0
    s_prev: float = 0.0


@dataclass(frozen=True)
class TrafficObservation:
    """Longitudinal gap to the closest oncoming object, or None when no
    object is within the preview range."""

    d_traffic: float | None = None

    def __post_init__(self):
        if self.d_traffic is not None and self.d_traffic < 0.0:
            raise ValidationError("d_traffic must be >= 0 when present")

    @property
    def present(self) -> bool:
        return self.d_traffic is not None


NO_TRAFFIC = TrafficObservation(None)


def lateral_accel_preview(k: float, v: float) -> float:
    """Lateral acceleration K v^2 implied by tracking curvature k at
    speed v; signed, positive in left curves."""
    return k * v * v


def curve_cut_offset(style: StyleParams, a_y: float) -> float:
    """Curve-cutting target offset for a previewed lateral acceleration.

    The affine rule is applied to |a_y| and mirrored to the curve's
    inside (sign of a_y), so both the gradient and the global offset ccg0
    act toward the inside of the current curve. Zero on straights.
    """
    if a_y == 0.0:
        return 0.0
    return math.copysign(1.0, a_y) * (abs(a_y) * style.ccg + style.ccg0)


def traffic_offset(
    style: StyleParams, obs: TrafficObservation, inverted_ramp: bool = False
) -> float:
    """Raw (unlimited) traffic shift for the current observation.

    Default ramp: d_t0 * (1 - d_traffic / rho_t), clamped to [d_t0, 0];
    zero at the preview boundary, full shift when abreast. The
    inverted_ramp variant d_t0 * (d_traffic / rho_t + 1) grows with
    distance instead; it is kept only for comparison runs and is clamped
    to the same interval.
    """
    if not obs.present:
        return 0.0
    d = obs.d_traffic
    if inverted_ramp:
        raw = style.d_t0 * (d / style.rho_t + 1.0)
    else:
        raw = style.d_t0 * (1.0 - d / style.rho_t)
    return min(0.0, max(style.d_t0, raw))


def rate_limit_traffic_offset(
    style: StyleParams, state: BehaviorState, raw: float, steps: float
) -> float:
    """Clamp the traffic shift to the previous value +/- half the ramp
    slope per update step.

    steps is the number of canonical update steps elapsed (fractional
    when the caller integrates at a dt other than CONTROLLER_TICK).
    Updates state.d_cl_t_prev and returns the limited shift.
    """
    grad = abs(style.d_t0 / style.rho_t)
    allow = 0.5 * grad * steps
    prev = state.d_cl_t_prev
    limited = min(prev + allow, max(prev - allow, raw))
    state.d_cl_t_prev = limited
    return limited


def target_offset(
    style: StyleParams,
    k: float,
    v: float,
    obs: TrafficObservation,
    state: BehaviorState,
    steps: float = 1.0,
    inverted_ramp: bool = False,
) -> float:
    """Combined target lane offset for one tick.

    While the traffic shift is in play (vehicle in preview, or the
    limited shift still releasing back to 0) the minimum of the two
    branches applies, so the rightward shift is never undercut by
    leftward curve cutting. With no traffic influence the curve-cutting
    offset stands alone; a plain minimum against an inactive 0 would
    suppress every left-curve cut.
    """
    d_ccg = curve_cut_offset(style, lateral_accel_preview(k, v))
    raw = traffic_offset(style, obs, inverted_ramp)
    d_t = rate_limit_traffic_offset(style, state, raw, steps)
    if obs.present or d_t != 0.0:
        return min(d_ccg, d_t)
    return d_ccg
