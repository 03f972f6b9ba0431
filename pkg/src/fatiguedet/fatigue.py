"""Alert unit: clamped running sum of classifier outputs, two-threshold
fatigue levels, and the alarm/escalation state machine.

The accumulator integrates +1/-1 classifier outputs and never drops below
zero. Crossing the lower threshold triggers a fixed-duration alarm cycle;
crossing the upper threshold escalates to vehicle-side actions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union


class FatigueLevel(enum.IntEnum):
    NONE = 0
    LOW = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return {0: "None", 1: "Low", 2: "High"}[int(self)]


class EventKind(str, enum.Enum):
    ALARM_ON = "AlarmOn"
    ALARM_OFF = "AlarmOff"
    REDUCE_SPEED = "ReduceSpeed"
    STOP_VEHICLE = "StopVehicle"
    WATER_SPRAY = "WaterSpray"


@dataclass(frozen=True)
class ActuatorEvent:
    kind: EventKind
    t: float


@dataclass(frozen=True)
class FatigueAccumulator:
    """Running sum r (clamped at zero) and elapsed time t in seconds."""

    r: int = 0
    t: float = 0.0

    def __post_init__(self):
        if self.r < 0 or self.t < 0:
            raise ValueError("accumulator requires r >= 0 and t >= 0")


@dataclass(frozen=True)
class AlertConfig:
    """Thresholds and timing for the alert unit.

    t_low/t_high split the running sum into None/Low/High bands. A Low
    reading keeps the alarm ringing for alarm_duration seconds before the
    level is re-checked; a High reading escalates immediately and issues a
    vehicle stop after high_persist seconds in the High band.
    """

    t_low: int = 5
    t_high: int = 15
    alarm_duration: float = 10.0
    high_persist: float = 5.0
    water_spray_enabled: bool = False
    sample_period: float = 1.0
    realarm_on_recheck: bool = False

    def __post_init__(self):
        if not (1 <= self.t_low < self.t_high):
            raise ValueError("need 1 <= t_low < t_high")
        if self.alarm_duration <= 0 or self.sample_period <= 0:
            raise ValueError("durations must be positive")
        if self.high_persist < 0:
            raise ValueError("high_persist must be >= 0")


@dataclass(frozen=True)
class Idle:
    def render(self) -> str:
        return "Idle"


@dataclass(frozen=True)
class LowAlarm:
    remaining: float

    def render(self) -> str:
        return f"LowAlarm({_fmt(self.remaining)})"


@dataclass(frozen=True)
class HighAlert:
    elapsed: float
    stop_issued: bool

    def render(self) -> str:
        return f"HighAlert({_fmt(self.elapsed)},{int(self.stop_issued)})"


AlertState = Union[Idle, LowAlarm, HighAlert]

IDLE = Idle()


def _fmt(x: float) -> str:
    return str(int(x)) if float(x) == int(x) else repr(float(x))


def step(acc: FatigueAccumulator, label: int,
         sample_period: float = 1.0) -> FatigueAccumulator:
    """Advance the running sum by one classifier output: r' = max(0, r + s)."""
    if label not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {label}")
    return FatigueAccumulator(max(0, acc.r + label), acc.t + sample_period)


def level(acc: FatigueAccumulator, config: AlertConfig) -> FatigueLevel:
    """Classify the running sum: High at r >= t_high, Low at r >= t_low."""
    if acc.r >= config.t_high:
        return FatigueLevel.HIGH
    if acc.r >= config.t_low:
        return FatigueLevel.LOW
    return FatigueLevel.NONE


def alert_step(state: AlertState, lvl: FatigueLevel, dt: float,
               config: AlertConfig,
               now: float = 0.0) -> tuple[AlertState, list[ActuatorEvent]]:
    """Advance the alarm state machine by one tick.

    now is the tick's end timestamp, stamped onto emitted events. High
    pre-empts everything; leaving HighAlert silences the alarm and re-enters
    through the Idle rules on the same tick.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    events: list[ActuatorEvent] = []

    def emit(kind: EventKind) -> None:
        events.append(ActuatorEvent(kind, now))

    if lvl == FatigueLevel.HIGH:
        if isinstance(state, HighAlert):
            elapsed = state.elapsed + dt
            stop = state.stop_issued
            if not stop and elapsed >= config.high_persist:
                emit(EventKind.STOP_VEHICLE)
                stop = True
            return HighAlert(elapsed, stop), events
        if isinstance(state, Idle):
            emit(EventKind.ALARM_ON)
        emit(EventKind.REDUCE_SPEED)
        if config.water_spray_enabled:
            emit(EventKind.WATER_SPRAY)
        stop = False
        if config.high_persist <= 0:
            emit(EventKind.STOP_VEHICLE)
            stop = True
        return HighAlert(0.0, stop), events

    if isinstance(state, HighAlert):
        emit(EventKind.ALARM_OFF)
        state = IDLE

    if isinstance(state, Idle):
        if lvl == FatigueLevel.LOW:
            emit(EventKind.ALARM_ON)
            return LowAlarm(config.alarm_duration), events
        return IDLE, events

    # LowAlarm: the alarm rings for the full duration, then re-check.
    remaining = state.remaining - dt
    if remaining > 0:
        return LowAlarm(remaining), events
    if lvl == FatigueLevel.LOW:
        if config.realarm_on_recheck:
            emit(EventKind.ALARM_ON)
        return LowAlarm(config.alarm_duration), events
    emit(EventKind.ALARM_OFF)
    return IDLE, events


@dataclass(frozen=True)
class TraceTick:
    t: float
    r: int
    level: FatigueLevel
    state: AlertState


@dataclass
class Trace:
    config: AlertConfig
    ticks: list[TraceTick]
    events: list[ActuatorEvent]

    def render(self) -> str:
        """Line-oriented text form, suitable for diff-based golden tests."""
        c = self.config
        lines = [
            "# t_low=%d t_high=%d alarm_duration=%s high_persist=%s "
            "water_spray=%d sample_period=%s" % (
                c.t_low, c.t_high, _fmt(c.alarm_duration),
                _fmt(c.high_persist), int(c.water_spray_enabled),
                _fmt(c.sample_period)),
        ]
        by_time: dict[float, list[ActuatorEvent]] = {}
        for ev in self.events:
            by_time.setdefault(ev.t, []).append(ev)
        for tick in self.ticks:
            lines.append(f"TICK {_fmt(tick.t)} {tick.r} "
                         f"{tick.level.label} {tick.state.render()}")
            for ev in by_time.get(tick.t, ()):
                lines.append(f"EVENT {_fmt(ev.t)} {ev.kind.value}")
        return "\n".join(lines) + "\n"


def simulate(labels: Sequence[int], config: AlertConfig) -> Trace:
    """Fold step -> level -> alert_step over a label sequence from rest."""
    if len(labels) == 0:
        raise ValueError("label sequence must be non-empty")
    acc = FatigueAccumulator()
    state: AlertState = IDLE
    ticks: list[TraceTick] = []
    events: list[ActuatorEvent] = []
    for label in labels:
        acc = step(acc, label, config.sample_period)
        lvl = level(acc, config)
        state, evs = alert_step(state, lvl, config.sample_period, config,
                                now=acc.t)
        events.extend(evs)
        ticks.append(TraceTick(acc.t, acc.r, lvl, state))
    return Trace(config, ticks, events)
