"""Supervisory grid-flexibility control.

A rule-based supervisor shapes the zone setpoints inside configured event
windows (efficiency widening, load shed, pre-cool/shift, modulation tracking a
dispatch signal).  Outside every window the baseline passes through exactly.
A slow-controller harness lets an optimization-style controller run in
parallel: submitted jobs become visible only at a later step barrier, never
in the step that submitted them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class GebMode(Enum):
    EFFICIENCY = "efficiency"
    SHED = "shed"
    SHIFT = "shift"
    MODULATE = "modulate"


@dataclass(frozen=True)
class SupervisorySetpoints:
    """Setpoint bundle sent down to the plant each step."""

    t_cool_c: float
    t_heat_c: float
    t_dis_c: float | None = None
    p_duct_pa: float | None = None


@dataclass(frozen=True)
class EventWindow:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (self.end_s > self.start_s):
            raise ValueError(f"window end {self.end_s} must exceed start {self.start_s}")

    def contains(self, t_s: float) -> bool:
        return self.start_s <= t_s < self.end_s


def validate_windows(windows: list[EventWindow]) -> list[EventWindow]:
    ordered = sorted(windows, key=lambda w: w.start_s)
    for a, b in zip(ordered, ordered[1:]):
        if b.start_s < a.end_s:
            raise ValueError(f"windows [{a.start_s}, {a.end_s}) and "
                             f"[{b.start_s}, {b.end_s}) overlap")
    return ordered


def signal_value(breakpoints: list[tuple[float, float]], t_s: float) -> float:
    """Piecewise-constant dispatch signal; holds the last value at or before t."""
    v = 0.0
    for time_s, value in breakpoints:
        if t_s >= time_s:
            v = value
        else:
            break
    return v


class GebController:
    """Rule-based supervisor producing one SupervisorySetpoints per step."""

    def __init__(self, mode: GebMode | str, baseline: SupervisorySetpoints,
                 windows: list[EventWindow] | None = None,
                 delta_eff_c: float = 1.0, delta_shed_c: float = 2.0,
                 delta_pre_c: float = 1.5, pre_window_s: float = 7200.0,
                 r_max_c_per_step: float = 0.5,
                 modulation_depth_c: float = 1.0,
                 modulation_signal: list[tuple[float, float]] | None = None,
                 t_min_c: float = 12.0, t_max_c: float = 32.0,
                 min_gap_c: float = 1.0):
        self.mode = GebMode(mode)
        self.baseline = baseline
        self.windows = validate_windows(windows or [])
        self.delta_eff = delta_eff_c
        self.delta_shed = delta_shed_c
        self.delta_pre = delta_pre_c
        self.pre_window = pre_window_s
        self.r_max = r_max_c_per_step
        self.mod_depth = modulation_depth_c
        self.mod_signal = modulation_signal or []
        for _, v in self.mod_signal:
            if not (-1.0 <= v <= 1.0):
                raise ValueError(f"modulation signal value {v} outside [-1, 1]")
        self.t_min, self.t_max = t_min_c, t_max_c
        self.min_gap = min_gap_c
        if baseline.t_cool_c - baseline.t_heat_c < min_gap_c:
            raise ValueError("baseline heating/cooling setpoints closer than the minimum gap")
        self._mod_offset = 0.0

    def _in_window(self, t_s: float) -> bool:
        return any(w.contains(t_s) for w in self.windows)

    def _in_pre_window(self, t_s: float) -> bool:
        return any(w.start_s - self.pre_window <= t_s < w.start_s for w in self.windows)

    def step(self, t_s: float) -> tuple[SupervisorySetpoints, list[str]]:
        """Setpoints for the step starting at t_s, plus clamp/gap flags."""
        base = self.baseline
        cool, heat = base.t_cool_c, base.t_heat_c
        in_win = self._in_window(t_s)

        if self.mode is GebMode.EFFICIENCY and in_win:
            cool += self.delta_eff / 2.0
            heat -= self.delta_eff / 2.0
        elif self.mode is GebMode.SHED and in_win:
            cool += self.delta_shed
        elif self.mode is GebMode.SHIFT:
            if in_win:
                cool += self.delta_shed
            elif self._in_pre_window(t_s):
                cool -= self.delta_pre
        elif self.mode is GebMode.MODULATE and in_win:
            target = self.mod_depth * signal_value(self.mod_signal, t_s)
            self._mod_offset = min(max(target, self._mod_offset - self.r_max),
                                   self._mod_offset + self.r_max)
            cool += self._mod_offset

        if self.mode is GebMode.MODULATE and not in_win:
            self._mod_offset = 0.0

        flags = []
        for name, v in (("t_cool", cool), ("t_heat", heat)):
            clamped = min(max(v, self.t_min), self.t_max)
            if clamped != v:
                flags.append(f"clamp:{name}")
            if name == "t_cool":
                cool = clamped
            else:
                heat = clamped
        if cool - heat < self.min_gap:
            cool = heat + self.min_gap
            flags.append("gap")
        return SupervisorySetpoints(cool, heat, base.t_dis_c, base.p_duct_pa), flags


class SlowBusyError(Exception):
    """submit() while a previous job is still pending."""


class SlowControllerHarness:
    """Runs an expensive controller logically in parallel with the loop.

    A job submitted at step N with compute latency L becomes visible at the
    barrier of step N + max(1, ceil(L / step)); latency zero still lands at
    N + 1, never in the submitting step.  Results are consumed exactly once;
    results older than the freshness horizon at poll time are discarded.
    """

    def __init__(self, compute_fn, compute_latency_s: float, step_size_s: float,
                 freshness_s: float = 600.0):
        self.compute_fn = compute_fn
        self.latency = compute_latency_s
        self.step_size = step_size_s
        self.freshness = freshness_s
        self._pending = None  # (submit_step, ready_step, inputs)
        self.discarded = 0

    @property
    def pending(self) -> bool:
        return self._pending is not None

    def ready_step(self, submit_step: int) -> int:
        return submit_step + max(1, math.ceil(self.latency / self.step_size))

    def submit(self, step: int, inputs) -> None:
        if self._pending is not None:
            raise SlowBusyError(f"job from step {self._pending[0]} still pending")
        self._pending = (step, self.ready_step(step), inputs)

    def poll(self, step: int):
        """Result if ready at this barrier, else None.  Consumes on return."""
        if self._pending is None:
            return None
        submit_step, ready, inputs = self._pending
        if step < ready:
            return None
        self._pending = None
        if (step - submit_step) * self.step_size > self.freshness:
            self.discarded += 1
            return None
        return self.compute_fn(inputs)
