"""GG-envelope-constrained path following.

Speed planning runs three passes over a 1 m grid: a curvature cap
v <= sqrt(ay_max/|K|) clipped to the target speed, a backward pass that
limits braking, and a forward pass that limits acceleration. Both passes
scale the available longitudinal acceleration by the elliptic envelope
coupling sqrt(1 - (a_y/ay_max)^2), so the planned profile never demands
more combined grip than the style allows.

The per-tick controller is pure pursuit toward the reference path (the
centerline shifted by the target offset) plus a proportional speed
controller clamped to the same coupled envelope, integrating a kinematic
bicycle in Frenet coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .road import TrackModel, curvature_at, pose_at
from .styles import StyleParams


@dataclass(frozen=True)
class VehicleState:
    """Frenet-frame vehicle state: arc length s, lateral offset d,
    heading error relative to the centerline tangent, speed, and the
    accelerations realized on the last tick."""

    s: float
    d: float
    heading_err: float
    v: float
    a_x: float = 0.0
    a_y: float = 0.0

    def __post_init__(self):
        if self.v < 0.0:
            raise ValidationError("speed must be >= 0")

    @property
    def finite(self) -> bool:
        return all(
            math.isfinite(x)
            for x in (self.s, self.d, self.heading_err, self.v, self.a_x, self.a_y)
        )


@dataclass(frozen=True)
class ControlCommand:
    """Steering-wheel angle (rad) and longitudinal acceleration command."""

    steer: float
    a_x_cmd: float


@dataclass(frozen=True)
class SimConfig:
    """Controller and integration constants.

    Geometry and steering limits approximate a compact car. The
    lookahead distance is lookahead_gain * v clamped to lookahead_bounds;
    the resulting target-tracking lag is roughly lookahead_gain seconds,
    which keeps the offset at the traffic pass point within a few
    centimeters of the commanded shift. preview_time is how far ahead
    (in seconds of travel) the behavior layer samples curvature.

    target_slew (m/s) bounds how fast the offset commanded to the
    follower may move. The curve-cutting rule steps by ccg0 when the
    previewed curvature changes sign; slewing the commanded copy keeps
    such steps drivable without slowing the (much gentler) traffic-shift
    ramps. v0 is the launch speed at the start of a run.
    """

    dt: float = 0.01
    v_target: float = 22.2
    wheelbase: float = 2.62
    steer_ratio: float = 14.0
    steer_max: float = 8.0
    lookahead_gain: float = 0.25
    lookahead_bounds: tuple = (5.0, 40.0)
    speed_gain: float = 1.5
    preview_time: float = 0.25
    target_slew: float = 0.4
    v0: float = 5.0

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValidationError("dt must be > 0")
        if not (self.v_target > 0.0):
            raise ValidationError("v_target must be > 0")
        if not (self.wheelbase > 0.0 and self.steer_ratio > 0.0):
            raise ValidationError("wheelbase and steer_ratio must be > 0")
        if not (self.steer_max > 0.0):
            raise ValidationError("steer_max must be > 0")
        lo, hi = self.lookahead_bounds
        if not (0.0 < lo <= hi):
            raise ValidationError("lookahead_bounds must satisfy 0 < lo <= hi")
        if not (self.lookahead_gain > 0.0 and self.speed_gain > 0.0):
            raise ValidationError("gains must be > 0")
        if not (self.target_slew > 0.0):
            raise ValidationError("target_slew must be > 0")
        if self.preview_time < 0.0 or self.v0 < 0.0:
            raise ValidationError("preview_time and v0 must be >= 0")


def _envelope_scale(a_y: float, ay_max: float) -> float:
    frac = abs(a_y) / ay_max
    return math.sqrt(max(0.0, 1.0 - frac * frac))


def speed_limit_profile(
    track: TrackModel,
    style: StyleParams,
    v_target: float,
    ds: float = 1.0,
    v0: float = None,
):
    """Admissible speed over the track on a ds-spaced grid.

    Returns (s_grid, v_lim) as numpy arrays. The backward pass evaluates
    the envelope coupling at the downstream node (the deeper point of the
    approaching curve) and the forward pass at the upstream node, so both
    are conservative where a_y is rising. v0, when given, caps the speed
    at s = 0 and the forward pass grows the launch ramp from it.
    """
    if ds <= 0.0:
        raise ValidationError("ds must be > 0")
    n = int(math.floor(track.total_length / ds))
    s_grid = np.arange(n + 1, dtype=float) * ds
    k = np.array([curvature_at(track, float(s)) for s in s_grid])
    with np.errstate(divide="ignore"):
        cap = np.where(k == 0.0, np.inf, np.sqrt(style.ay_max / np.abs(k)))
    v = np.minimum(cap, v_target)
    if v0 is not None:
        v[0] = min(v[0], v0)
    brake = abs(style.ax_min)
    for i in range(n - 1, -1, -1):
        avail = brake * _envelope_scale(k[i + 1] * v[i + 1] ** 2, style.ay_max)
        vmax = math.sqrt(v[i + 1] ** 2 + 2.0 * avail * ds)
        if v[i] > vmax:
            v[i] = vmax
    for i in range(n):
        avail = style.ax_max * _envelope_scale(k[i] * v[i] ** 2, style.ay_max)
        vmax = math.sqrt(v[i] ** 2 + 2.0 * avail * ds)
        if v[i + 1] > vmax:
            v[i + 1] = vmax
    return s_grid, v


def step(
    track: TrackModel,
    state: VehicleState,
    target_d: float,
    v_lim_here: float,
    cfg: SimConfig,
    style: StyleParams,
):
    """One control-and-integration tick.

    Pure pursuit steers toward the point lookahead meters ahead on the
    reference path offset by target_d; the chord construction makes the
    commanded curvature exact on circular references. The longitudinal
    command is proportional control toward v_lim_here, clamped to the
    envelope coupling evaluated at the current lateral acceleration.
    Saturates instead of raising on degenerate geometry.
    """
    lo, hi = cfg.lookahead_bounds
    lookahead = min(hi, max(lo, cfg.lookahead_gain * state.v))
    s_look = min(state.s + lookahead, track.total_length)
    xt, yt, _ = pose_at(track, s_look, target_d)
    xv, yv, th_c = pose_at(track, state.s, state.d)
    heading = th_c + state.heading_err

    dx = xt - xv
    dy = yt - yv
    cos_h = math.cos(heading)
    sin_h = math.sin(heading)
    local_x = cos_h * dx + sin_h * dy
    local_y = -sin_h * dx + cos_h * dy
    chord = math.hypot(local_x, local_y)
    if chord < 1e-9:
        kappa_cmd = 0.0
    else:
        kappa_cmd = 2.0 * local_y / (chord * chord)
    steer = math.atan(cfg.wheelbase * kappa_cmd) * cfg.steer_ratio
    steer = min(cfg.steer_max, max(-cfg.steer_max, steer))
    kappa_veh = math.tan(steer / cfg.steer_ratio) / cfg.wheelbase

    scale = _envelope_scale(state.a_y, style.ay_max)
    a_hi = style.ax_max * scale
    a_lo = style.ax_min * scale
    a_cmd = cfg.speed_gain * (v_lim_here - state.v)
    a_cmd = min(a_hi, max(a_lo, a_cmd))

    k_here = curvature_at(track, state.s)
    denom = 1.0 - state.d * k_here
    if denom < 0.1:
        denom = 0.1
    s_dot = max(0.0, state.v * math.cos(state.heading_err) / denom)
    d_dot = state.v * math.sin(state.heading_err)
    he_dot = state.v * kappa_veh - k_here * s_dot

    new_state = VehicleState(
        s=state.s + s_dot * cfg.dt,
        d=state.d + d_dot * cfg.dt,
        heading_err=state.heading_err + he_dot * cfg.dt,
        v=max(0.0, state.v + a_cmd * cfg.dt),
        a_x=a_cmd,
        a_y=kappa_veh * state.v * state.v,
    )
    return ControlCommand(steer=steer, a_x_cmd=a_cmd), new_state
