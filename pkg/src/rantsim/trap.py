"""Trapping instability theory: orbit radius, critical gain, trap detection.

All lengths here are nondimensional (sensor separation l_s = 1) and time runs
in decay units. A regime is summarized by three groups:

    L_w     = w / l_s            production spot diameter over sensor gap
    L_minus = (v_o / k_minus)/l_s   photormone decay length over sensor gap
    k_hat   = k_plus / k_minus   saturation concentration

Fast decay (L_minus <~ L_w): the agent orbits at r* = (L_w + 1)/4 where the
outer sensor periodically leaves the freshly painted spot. The outer sensor
reading converges to the mid-production value c(R) of an on/off relaxation
cycle with covered time tau1 and dark time tau2 per lap. A trap survives when
the gain can bend the path onto r*, i.e. G >= G_c = 1/(r* (k_hat - c(R))).

Slow decay (L_minus >> L_w): the trail smears into an axisymmetric steady
profile c_ss(r) and the orbit radius solves an implicit equation instead.

Gains G here are the nondimensional G/v_o of the raw linear turn law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass
class TrapRegime:
    L_w: float
    L_minus: float
    k_hat: float = 1.0

    def __post_init__(self):
        if self.L_w <= 0 or self.L_minus <= 0 or self.k_hat <= 0:
            raise ValueError("trap groups must be > 0")

    @classmethod
    def from_physical(cls, w: float, l_s: float, v_o: float,
                      k_plus: float, k_minus: float) -> "TrapRegime":
        return cls(L_w=w / l_s, L_minus=(v_o / k_minus) / l_s,
                   k_hat=k_plus / k_minus)

    @property
    def regime(self) -> str:
        if self.L_minus <= self.L_w:
            return "small_decay"
        if self.L_minus >= 10.0 * self.L_w:
            return "large_decay"
        return "general"


@dataclass
class TrapPrediction:
    r_star: float        # orbit radius, sensor-gap units
    G_c: float           # critical nondimensional gain (None if untrappable)
    regime: str
    branch: str


def trapping_radius_geometric(L_w: float) -> float:
    """Fast-decay orbit radius r* = (L_w + 1)/4."""
    if L_w <= 0:
        raise ValueError("L_w must be > 0")
    return 0.25 * (L_w + 1.0)


def coverage_geometry(regime: TrapRegime):
    """(x_over_R, tau1, tau2) of the outer sensor's on/off cycle."""
    L = regime.L_w
    if L < 1.0:
        raise ValueError("coverage geometry needs L_w >= 1")
    r_star = trapping_radius_geometric(L)
    x_over_r = (5.0 - L) / (3.0 + L)
    tau1 = 2.0 * r_star * np.arccos(x_over_r) / regime.L_minus
    period = 2.0 * np.pi * r_star / regime.L_minus
    return x_over_r, tau1, period - tau1


def outer_sensor_concentration(regime: TrapRegime) -> float:
    """Steady outer-sensor reading c(R) on the r* orbit (fast-decay theory)."""
    _, tau1, tau2 = coverage_geometry(regime)
    if tau1 == 0.0:
        return 0.0
    k = regime.k_hat
    return k * (1.0 - np.exp(0.5 * tau1) * (np.exp(tau2) - 1.0)
                / (np.exp(tau1 + tau2) - 1.0))


def critical_gain(regime: TrapRegime, branch: str = "auto"):
    """Minimum gain that sustains a trap; returns (G_c, branch_used).

    Branches: 'small_eps' is the sqrt(L_w - 1) expansion, 'large_width' the
    wide-spot closed form, 'general' the r_c = r* matching with the full c(R).
    """
    L, Lm, k = regime.L_w, regime.L_minus, regime.k_hat
    if branch == "auto":
        # The asymptotic branches are kept for comparison against their
        # expansions; the matching condition with the full c(R) is the
        # quantitative default whenever the cycle geometry exists.
        branch = "small_eps" if L - 1.0 <= 0.1 else "general"
    if branch == "small_eps":
        eps = L - 1.0
        if eps < 0:
            raise ValueError("small_eps branch needs L_w >= 1")
        gc = 2.0 / k + (L * np.sqrt(eps) / (Lm * k)) / np.tanh(np.pi * L / (2.0 * Lm))
    elif branch == "large_width":
        gc = (4.0 * Lm / (L * k)) * np.sinh(np.pi * L / (4.0 * Lm))
    elif branch == "general":
        r_star = trapping_radius_geometric(L)
        cr = outer_sensor_concentration(regime)
        if cr >= k:
            # outer sensor saturates at the inner level: no finite gain traps
            return float("inf"), branch
        gc = 1.0 / (r_star * (k - cr))
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return float(gc), branch


def steady_profile_css(r, regime: TrapRegime):
    """Slow-decay steady field around a trap centered at the origin.

    c_ss(r) = (k_hat/2) (e^{L_w/L_minus} - 1) [coth(pi r / L_minus) - 1]
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be > 0")
    pref = 0.5 * regime.k_hat * (np.exp(regime.L_w / regime.L_minus) - 1.0)
    x = np.pi * r / regime.L_minus
    return pref * (1.0 / np.tanh(x) - 1.0)


def implicit_radius_large_decay(regime: TrapRegime, G_nd: float,
                                r_lo: float = 0.5, r_hi: float = None):
    """Orbit radius in the slow-decay regime, or None when untrappable.

    Solves r = (2 L_minus / (pi G k_hat)) sinh^2(pi r / L_minus) / (e^{L_w/L_minus} - 1)
    for the smallest root in [r_lo, r_hi]. Orbits below half the sensor gap
    are rejected as geometrically meaningless; at small G the only root sits
    below that, so the agent cannot turn tightly enough and None is returned.
    """
    if G_nd <= 0:
        return None
    Lm = regime.L_minus
    r_hi = r_hi if r_hi is not None else 50.0 * Lm
    amp = (2.0 * Lm / (np.pi * G_nd * regime.k_hat)) / (np.exp(regime.L_w / Lm) - 1.0)

    def f(r):
        return amp * np.sinh(np.pi * r / Lm) ** 2 - r

    if f(r_lo) >= 0.0:
        return None
    # first crossing: march until the sign flips, then bisect
    lo = r_lo
    step = max(0.5, r_lo)
    hi = lo + step
    while hi <= r_hi and f(hi) < 0.0:
        lo, hi = hi, hi + step
        step *= 1.5
    if hi > r_hi:
        return None
    root = float(brentq(f, lo, hi, xtol=1e-12, rtol=1e-12))
    # deep in the smeared regime the sinh is effectively linear and the
    # closed-form limit is the cleaner (and equivalent) answer
    if Lm > 100.0 * root:
        return implicit_radius_linear_limit(regime, G_nd)
    return root


def implicit_radius_linear_limit(regime: TrapRegime, G_nd: float) -> float:
    """Small-argument limit of the implicit equation: r* = L_w G k_hat / (2 pi)."""
    return regime.L_w * G_nd * regime.k_hat / (2.0 * np.pi)


def predict(regime: TrapRegime, G_nd: float = None) -> TrapPrediction:
    """Radius and critical gain appropriate to the regime."""
    reg = regime.regime
    if reg == "large_decay":
        if G_nd is None:
            raise ValueError("large-decay radius depends on the gain")
        r = implicit_radius_large_decay(regime, G_nd)
        gc, branch = critical_gain(regime, "auto")
        return TrapPrediction(r_star=r, G_c=gc, regime=reg, branch=branch)
    gc, branch = critical_gain(regime, "auto")
    return TrapPrediction(r_star=trapping_radius_geometric(regime.L_w),
                          G_c=gc, regime=reg, branch=branch)


# ----- trap detection on simulated trajectories -----

def unwrap_periodic(xy: np.ndarray, width: float, height: float) -> np.ndarray:
    """Undo torus wrapping by accumulating minimum-image steps."""
    xy = np.asarray(xy, dtype=float)
    d = np.diff(xy, axis=0)
    d[:, 0] -= width * np.round(d[:, 0] / width)
    d[:, 1] -= height * np.round(d[:, 1] / height)
    out = np.empty_like(xy)
    out[0] = xy[0]
    out[1:] = xy[0] + np.cumsum(d, axis=0)
    return out


def detect_trap(xy: np.ndarray, dt: float, l_s: float, r_star_pred: float,
                window: float = 30.0):
    """Classify the tail of a trajectory as trapped or free.

    Over the trailing window the cloud of positions must fit inside a circle
    of radius 4 * l_s * r_star_pred, and the orbit center may drift by less
    than 25% of the measured bounding radius across the window. Positions
    must be unwrapped beforehand on periodic domains. Returns
    (trapped, fitted_radius, center).
    """
    xy = np.asarray(xy, dtype=float)
    n_win = max(2, int(round(window / dt)))
    tail = xy[-n_win:]
    center = tail.mean(axis=0)
    dist = np.hypot(tail[:, 0] - center[0], tail[:, 1] - center[1])
    r_bound = float(dist.max())
    r_fit = float(dist.mean())
    half = len(tail) // 2
    drift = float(np.linalg.norm(tail[half:].mean(axis=0) - tail[:half].mean(axis=0)))
    limit = 4.0 * l_s * r_star_pred
    trapped = bool(r_bound < limit and drift < 0.25 * max(r_bound, 1e-12))
    return trapped, r_fit, center


def write_phase_csv(path, rows) -> None:
    """Phase-diagram export: one row per (L_w, G, n, seed) probe."""
    with open(str(path), "w") as fh:
        fh.write("L_w,G_nd,n_agents,seed,trapped,radius\n")
        for r in rows:
            fh.write("{L_w:.6g},{G_nd:.6g},{n},{seed},{trapped:d},{radius:.6g}\n"
                     .format(**r))
