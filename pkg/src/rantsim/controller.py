"""Behavior controller: tanh turning law, wheel mapping, fetch/release logic.

The commanded turn rate blends phototaxis with a random walk,

    Omega = (C/l_s) tanh(alpha d K (c_L - c_R) / c_max)
          + ((1-C)/l_s) b sin(pi W),

with W a per-agent Wiener process. The cooperation parameter C in [0, 1]
interpolates pure random walk (0) to pure gradient following (1). d is +1
when driving forward and flips to -1 while hauling a substrate element; its
presence inside the tanh makes a reversing agent climb the gradient along its
direction of travel.

K in [-1, 1] sets the task: K > 0 fetches elements in the dark and releases
where the (clipped) photormone exceeds the upper threshold, growing structure
at nucleation sites; K < 0 mirrors the logic and excavates lit regions. |K|
is also the per-attempt success probability. The inequalities below negate
the K axis of the formula pair printed in the source experiment description,
which labels the tasks the opposite way; see BehaviorParams.printed_thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import AgentState, KinematicParams
from .core import RngStream


@dataclass
class BehaviorParams:
    C: float = 1.0            # cooperation (phototaxis weight), [0, 1]
    K: float = 1.0            # task parameter, [-1, 1]
    alpha: float = 50.0       # tanh sharpness
    b: float = 0.3            # random-walk turn amplitude
    l_s: float = 0.01         # sensor separation, m
    c_max: float = 5.0        # sensor dynamic range (saturation reading)
    c_bar: float = None       # threshold center; default 0.5 * c_max
    delta_c: float = None     # hysteresis half-width; default 0.1 * c_max
    thresholds: str = "enabled"   # "enabled" | "disabled"
    printed_thresholds: bool = False  # verbatim (inverted-K) inequality pair
    carry_time_disabled: float = 1.5  # mean carry duration when disabled, s
    maneuver_time: float = 1.0    # in-place rotation duration (avoid/release), s
    carry_min_time: float = 4.0   # attach maneuver + minimum haul before the
                                  # release threshold is consulted, s

    def __post_init__(self):
        if not 0.0 <= self.C <= 1.0:
            raise ValueError("C must lie in [0, 1]")
        if not -1.0 <= self.K <= 1.0:
            raise ValueError("K must lie in [-1, 1]")
        if self.c_max <= 0:
            raise ValueError("c_max must be > 0")
        if self.c_bar is None:
            self.c_bar = 0.5 * self.c_max
        if self.delta_c is None:
            self.delta_c = 0.1 * self.c_max
        if self.thresholds not in ("enabled", "disabled"):
            raise ValueError(f"unknown thresholds mode {self.thresholds!r}")


@dataclass
class ControlOutput:
    omega: float              # commanded turn rate (pre wheel gain)
    action: str               # exactly one of the five per tick
    rotate_by: float = 0.0    # instantaneous in-place rotation, rad

    def __post_init__(self):
        if self.action not in ("none", "fetch", "avoid", "release", "reset_forward"):
            raise ValueError(f"unknown action {self.action!r}")


def clip_reading(c: float, p: BehaviorParams) -> float:
    """Sensor dynamic range: readings saturate at c_max (and at 0 below)."""
    return min(max(c, 0.0), p.c_max)


def turning_law(c_left: float, c_right: float, W: float, p: BehaviorParams,
                d: int) -> float:
    cl = clip_reading(c_left, p)
    cr = clip_reading(c_right, p)
    taxis = (p.C / p.l_s) * np.tanh(p.alpha * d * p.K * (cl - cr) / p.c_max)
    walk = ((1.0 - p.C) / p.l_s) * p.b * np.sin(np.pi * W)
    return float(taxis + walk)


def wheel_speeds(omega: float, d: int, k: KinematicParams, gain: float):
    """Differential-drive linear wheel speeds (left, right), m/s.

    omega_{L,R} = d (v_o -/+ gain (l_w/2) omega). Mean gives the body speed
    d*v_o; the body turn rate realized by the drive is gain*omega (the wheel
    differential carries the d factor, which cancels against reversed travel).
    """
    half = gain * 0.5 * k.l_w * omega
    return d * (k.v_o - half), d * (k.v_o + half)


def fetch_allowed(c_here: float, p: BehaviorParams) -> bool:
    if p.thresholds == "disabled":
        return True
    c = clip_reading(c_here, p)
    if p.printed_thresholds:
        return p.K * p.C * c > p.K * (p.c_bar + p.K * p.delta_c)
    return p.K * p.C * c < p.K * (p.c_bar - p.K * p.delta_c)


def release_allowed(c_here: float, p: BehaviorParams) -> bool:
    if p.thresholds == "disabled":
        return True
    c = clip_reading(c_here, p)
    if p.printed_thresholds:
        return p.K * c < p.C * p.K * (p.c_bar - p.K * p.delta_c)
    return p.K * c > p.C * p.K * (p.c_bar + p.K * p.delta_c)


def _attempt_succeeds(p: BehaviorParams, rng: RngStream) -> bool:
    return rng.bernoulli(min(1.0, abs(p.K)))


def behavior_tick(c_left: float, c_right: float, obstacle_detected: bool,
                  s: AgentState, p: BehaviorParams, rng: RngStream,
                  W: float, dt: float,
                  carry_time: float = np.inf) -> ControlOutput:
    """One controller tick; emits the turn rate and exactly one action.

    Priority: obstacle handling (fetch or avoid) while driving forward, then
    the no-obstacle reset (d -> +1, magnet off), then release while reversing.
    c_here is the mean of the two sensor readings. carry_time is how long the
    current element has been held; the threshold release path stays closed
    until it reaches carry_min_time (the attach cycle plus a minimum haul).
    """
    omega = turning_law(c_left, c_right, W, p, s.d)
    c_here = 0.5 * (c_left + c_right)

    if obstacle_detected and s.d == 1:
        if fetch_allowed(c_here, p) and _attempt_succeeds(p, rng):
            return ControlOutput(omega=omega, action="fetch")
        return ControlOutput(omega=omega, action="avoid",
                             rotate_by=rng.uniform(-np.pi, np.pi))

    if not obstacle_detected:
        if s.d == -1 or s.carrying >= 0:
            # dropped/lost element: recover to forward drive
            return ControlOutput(omega=omega, action="reset_forward")
        return ControlOutput(omega=omega, action="none")

    if s.d == -1:
        if p.thresholds == "disabled":
            ok = rng.bernoulli(min(1.0, dt / p.carry_time_disabled))
        else:
            ok = (carry_time >= p.carry_min_time
                  and release_allowed(c_here, p) and _attempt_succeeds(p, rng))
        if ok:
            return ControlOutput(omega=omega, action="release",
                                 rotate_by=rng.uniform(-np.pi, np.pi))
    return ControlOutput(omega=omega, action="none")
