"""Scenario assembly and the fixed-step closed-loop simulation.

A run drives one style (or a replay trace) over a track from s = 0 to
the end at a fixed dt. Each tick observes the closest oncoming actor,
asks the behavior layer for a target lane offset, and advances the path
follower one step. Oncoming actors are spawned by a TrafficScript: when
the ego vehicle crosses an encounter's trigger arc length, the actor
appears at the style's preview range and approaches on the opposite lane
at constant speed. Weather is carried as metadata only and never touches
the dynamics.
"""

import csv
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .behavior import (
    CONTROLLER_TICK,
    NO_TRAFFIC,
    BehaviorState,
    TrafficObservation,
    target_offset,
)
from .errors import NumericError, ValidationError
from .pathfollow import SimConfig, VehicleState, speed_limit_profile, step
from .road import TrackModel, curvature_at, generate_track
from .styles import ReplayTrace, StyleParams

WEATHER_VALUES = ("dry", "rain")
ACTOR_KINDS = ("truck", "car")

# Permissive envelope used when following a replay trace: the recorded
# targets already encode the original style's limits, so the follower
# only needs enough authority to track them.
REPLAY_ENVELOPE = StyleParams(
    name="replay",
    ccg=0.0,
    ccg0=0.0,
    rho_t=80.0,
    d_t0=0.0,
    ax_max=6.0,
    ax_min=-6.0,
    ay_max=8.0,
)

DEFAULT_ACTOR_SPEED = 19.4


@dataclass(frozen=True)
class WeatherTag:
    """Run metadata: 'dry' or 'rain'. Has no effect on the dynamics."""

    value: str = "dry"

    def __post_init__(self):
        if self.value not in WEATHER_VALUES:
            raise ValidationError(f"weather must be one of {WEATHER_VALUES}")


@dataclass(frozen=True)
class Encounter:
    """One scripted oncoming vehicle.

    trigger_s: ego arc length at which the vehicles become mutually
    visible; actor_speed: the actor's constant speed toward the ego.
    """

    trigger_s: float
    actor_speed: float
    actor_kind: str = "truck"

    def __post_init__(self):
        object.__setattr__(self, "trigger_s", float(self.trigger_s))
        object.__setattr__(self, "actor_speed", float(self.actor_speed))
        if self.trigger_s < 0.0:
            raise ValidationError("trigger_s must be >= 0")
        if not (self.actor_speed > 0.0):
            raise ValidationError("actor_speed must be > 0")
        if self.actor_kind not in ACTOR_KINDS:
            raise ValidationError(f"actor_kind must be one of {ACTOR_KINDS}")


@dataclass(frozen=True)
class TrafficScript:
    """Ordered encounters; empty means free driving."""

    encounters: tuple = ()

    def __post_init__(self):
        enc = tuple(self.encounters)
        object.__setattr__(self, "encounters", enc)
        triggers = [e.trigger_s for e in enc]
        if any(b < a for a, b in zip(triggers, triggers[1:])):
            raise ValidationError("encounters must be sorted by trigger_s")


SIMLOG_COLUMNS = (
    "t",
    "s",
    "v",
    "a_x",
    "a_y",
    "k",
    "d_cl_target",
    "d_cl_actual",
    "steer",
    "d_traffic",
    "weather",
    "style",
)

# Logged in d_traffic whenever no oncoming object is within preview.
NO_TRAFFIC_SENTINEL = -1.0


@dataclass(frozen=True)
class SimLog:
    """Fixed-step trajectory record of one run.

    Numeric columns are numpy arrays of equal length; weather and style
    are constant per run and repeated per row on export.
    """

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    k: np.ndarray
    d_cl_target: np.ndarray
    d_cl_actual: np.ndarray
    steer: np.ndarray
    d_traffic: np.ndarray
    weather: str = "dry"
    style: str = ""

    def __post_init__(self):
        cols = [
            self.t,
            self.s,
            self.v,
            self.a_x,
            self.a_y,
            self.k,
            self.d_cl_target,
            self.d_cl_actual,
            self.steer,
            self.d_traffic,
        ]
        n = len(self.t)
        if any(len(c) != n for c in cols):
            raise ValidationError("log columns must have equal length")
        if n == 0:
            raise ValidationError("log must not be empty")
        if np.any(np.diff(self.t) <= 0.0):
            raise ValidationError("log time must be strictly increasing")
        if np.any(np.diff(self.s) < 0.0):
            raise ValidationError("log arc length must be nondecreasing")
        if self.weather not in WEATHER_VALUES:
            raise ValidationError(f"weather must be one of {WEATHER_VALUES}")

    def __len__(self):
        return len(self.t)

    def to_frame(self) -> pd.DataFrame:
        n = len(self.t)
        return pd.DataFrame(
            {
                "t": self.t,
                "s": self.s,
                "v": self.v,
                "a_x": self.a_x,
                "a_y": self.a_y,
                "k": self.k,
                "d_cl_target": self.d_cl_target,
                "d_cl_actual": self.d_cl_actual,
                "steer": self.steer,
                "d_traffic": self.d_traffic,
                "weather": np.full(n, self.weather, dtype=object),
                "style": np.full(n, self.style, dtype=object),
            }
        )

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "SimLog":
        missing = [c for c in SIMLOG_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError(f"log is missing columns: {missing}")
        weather = frame["weather"].unique()
        style = frame["style"].unique()
        if len(weather) != 1 or len(style) != 1:
            raise ValidationError("log must contain a single weather and style")
        numeric = {
            c: np.asarray(frame[c], dtype=float) for c in SIMLOG_COLUMNS[:-2]
        }
        return cls(weather=str(weather[0]), style=str(style[0]), **numeric)

    @classmethod
    def read_csv(cls, path) -> "SimLog":
        return cls.from_frame(pd.read_csv(path, float_precision="round_trip"))

    def to_trace(self) -> ReplayTrace:
        """Condense the run into a replayable (s, d_cl, v) trace.

        Strictly increasing s is enforced by dropping stalled rows.
        """
        keep = np.concatenate(([True], np.diff(self.s) > 0.0))
        return ReplayTrace(
            tuple(self.s[keep]),
            tuple(self.d_cl_actual[keep]),
            tuple(self.v[keep]),
        )


TRAFFIC_CSV_HEADER = ["trigger_s", "actor_speed", "actor_kind"]


def write_traffic_csv(script: TrafficScript, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRAFFIC_CSV_HEADER)
        for e in script.encounters:
            w.writerow([repr(e.trigger_s), repr(e.actor_speed), e.actor_kind])


def read_traffic_csv(path) -> TrafficScript:
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != TRAFFIC_CSV_HEADER:
            raise ValidationError(
                f"traffic file must start with {','.join(TRAFFIC_CSV_HEADER)!r}"
            )
        enc = []
        for i, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"line {i}: expected 3 fields")
            try:
                enc.append(Encounter(float(row[0]), float(row[1]), row[2]))
            except ValueError as e:
                raise ValidationError(f"line {i}: {e}") from e
    return TrafficScript(tuple(enc))


def run(
    track: TrackModel,
    style,
    script: TrafficScript = TrafficScript(),
    cfg: SimConfig = SimConfig(),
    weather: WeatherTag = WeatherTag("dry"),
    inverted_ramp: bool = False,
) -> SimLog:
    """Simulate one full pass over the track and return its log.

    style is a StyleParams or a ReplayTrace; replay bypasses the behavior
    layer and feeds the recorded (d_cl, v) back as targets. Raises
    NumericError with the offending row index if the state diverges.
    """
    replay = isinstance(style, ReplayTrace)
    env = REPLAY_ENVELOPE if replay else style
    label = "replay" if replay else style.name
    total = track.total_length
    for e in script.encounters:
        if e.trigger_s > total:
            raise ValidationError(
                f"encounter trigger {e.trigger_s} beyond track end {total}"
            )

    if not replay:
        grid_s, grid_v = speed_limit_profile(track, env, cfg.v_target, 1.0, cfg.v0)
        v0 = min(cfg.v0, float(grid_v[0]))
    else:
        v0 = style.v_at(0.0)

    state = VehicleState(
        s=0.0,
        d=style.d_at(0.0) if replay else 0.0,
        heading_err=0.0,
        v=v0,
    )
    bstate = BehaviorState()
    steps_per_tick = cfg.dt / CONTROLLER_TICK
    speed_preview = 1.0 / cfg.speed_gain
    slew_per_tick = cfg.target_slew * cfg.dt
    cmd_target = style.d_at(0.0) if replay else 0.0

    pending = list(script.encounters)
    actors = []  # absolute arc position of each spawned oncoming actor

    cols = {name: [] for name in SIMLOG_COLUMNS[:-2]}
    max_ticks = int((total + 60.0) / cfg.dt) + 1  # bail out below 1 m/s average
    i = 0
    while state.s < total:
        if i >= max_ticks:
            raise NumericError(f"run stalled before track end at row {i}")

        while pending and state.s >= pending[0].trigger_s:
            actors.append([state.s + env.rho_t, pending.pop(0).actor_speed])

        gap = None
        for pos, _ in actors:
            g = pos - state.s
            if 0.0 <= g <= env.rho_t and (gap is None or g < gap):
                gap = g
        obs = TrafficObservation(gap) if gap is not None else NO_TRAFFIC

        if replay:
            target_d = style.d_at(state.s)
            v_here = style.v_at(state.s)
        else:
            s_prev = min(state.s + state.v * cfg.preview_time, total)
            k_prev = curvature_at(track, s_prev)
            # offset rule sees the lateral acceleration expected at the
            # preview point, so profile speed there, not current speed
            v_prev = float(np.interp(s_prev, grid_s, grid_v))
            target_d = target_offset(
                style, k_prev, v_prev, obs, bstate, steps_per_tick, inverted_ramp
            )
            v_here = float(
                np.interp(state.s + state.v * speed_preview, grid_s, grid_v)
            )

        # the follower gets a slewed copy so ccg0 steps stay drivable
        delta = target_d - cmd_target
        cmd_target += min(slew_per_tick, max(-slew_per_tick, delta))

        cmd, nxt = step(track, state, cmd_target, v_here, cfg, env)
        if not nxt.finite:
            raise NumericError(f"non-finite vehicle state at row {i}")

        cols["t"].append(i * cfg.dt)
        cols["s"].append(state.s)
        cols["v"].append(state.v)
        cols["a_x"].append(cmd.a_x_cmd)
        cols["a_y"].append(nxt.a_y)
        cols["k"].append(curvature_at(track, state.s))
        cols["d_cl_target"].append(target_d)
        cols["d_cl_actual"].append(state.d)
        cols["steer"].append(cmd.steer)
        cols["d_traffic"].append(gap if gap is not None else NO_TRAFFIC_SENTINEL)

        bstate.s_prev = state.s
        for actor in actors:
            actor[0] -= actor[1] * cfg.dt
        state = nxt
        i += 1

    return SimLog(
        weather=weather.value,
        style=label,
        **{name: np.asarray(vals) for name, vals in cols.items()},
    )


def default_study_scenario(seed: int = 1):
    """The standard study layout: 5 km, 30 curves, four oncoming trucks,
    two triggered inside left curves and two on straights.

    Deterministic in seed. Returns (TrackModel, TrafficScript).
    """
    root = np.random.default_rng(seed)
    track_seed = int(root.integers(0, 2**31 - 1))
    track = generate_track(5000.0, 30, (80.0, 400.0), seed=track_seed)

    total = track.total_length
    arc_candidates = []
    straight_candidates = []
    for s0, seg in zip(track.segment_starts, track.segments):
        trigger = s0 + min(10.0, seg.length / 2.0)
        if not (300.0 <= trigger <= total - 200.0):
            continue
        if seg.kind == "arc" and seg.k_start > 0.0:
            arc_candidates.append(trigger)
        elif seg.kind == "straight" and seg.length >= 30.0:
            straight_candidates.append(trigger)

    min_gap = 300.0
    for _ in range(64):
        picked = []
        ok = True
        for pool, want in ((arc_candidates, 2), (straight_candidates, 2)):
            order = root.permutation(len(pool))
            got = 0
            for idx in order:
                t = pool[idx]
                if all(abs(t - p) >= min_gap for p in picked):
                    picked.append(t)
                    got += 1
                    if got == want:
                        break
            if got < want:
                ok = False
                break
        if ok:
            encounters = tuple(
                Encounter(t, DEFAULT_ACTOR_SPEED, "truck") for t in sorted(picked)
            )
            return track, TrafficScript(encounters)
    raise ValidationError(
        "could not place four separated encounters on the generated track"
    )


__all__ = [
    "WeatherTag",
    "Encounter",
    "TrafficScript",
    "SimLog",
    "SIMLOG_COLUMNS",
    "NO_TRAFFIC_SENTINEL",
    "REPLAY_ENVELOPE",
    "run",
    "default_study_scenario",
    "read_traffic_csv",
    "write_traffic_csv",
]
