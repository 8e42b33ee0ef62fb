"""Agent kinematics and the reduced constant-gradient dynamics.

An agent is a point at r with heading theta moving at speed v_o along
p = (cos th, sin th); the turn rate responds to the photormone gradient
through Omega = G * (grad c . n) with n the left normal.

In a radially symmetric field with constant gradient magnitude lambda the
dynamics reduce (lengths in 1/lambda, time in 1/(v_o lambda)) to

    r'   = cos psi
    psi' = (G_nd - 1/r) sin psi,     G_nd = G / v_o

with the circular orbit fixed point (psi*, r*) = (pi/2, 1/G_nd). The
linearized and Poincare-Lindstedt solutions below describe motion near that
orbit and serve as analytic oracles for the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SimConfig, wrap_angle, wrap_or_clamp


@dataclass
class KinematicParams:
    v_o: float = 0.04    # drive speed, m/s
    G: float = 0.01      # gradient gain (turn rate per unit gradient)
    l_s: float = 0.01    # sensor separation, m
    l_w: float = 0.03    # wheel base, m

    def __post_init__(self):
        if self.v_o <= 0 or self.l_s <= 0 or self.l_w <= 0:
            raise ValueError("v_o, l_s, l_w must be > 0")


@dataclass
class AgentState:
    r: np.ndarray
    theta: float
    d: int = 1           # +1 forward, -1 reversing (carrying)
    carrying: int = -1   # substrate element id, -1 if none
    id: int = 0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = wrap_angle(self.theta)
        if self.d not in (-1, 1):
            raise ValueError("d must be +1 or -1")


def gradient_turn_rate(c_left: float, c_right: float, k: KinematicParams) -> float:
    """Raw linear turn law Omega = G (c_L - c_R) / l_s."""
    return k.G * (c_left - c_right) / k.l_s


def step_kinematics(s: AgentState, omega: float, k: KinematicParams,
                    cfg: SimConfig, dt: float) -> AgentState:
    """Advance one tick: rotate, then translate along the midpoint heading.

    Using the half-updated heading for the translation keeps circular orbits
    closed to second order, which the constant-gradient tests rely on.
    """
    theta_new = s.theta + omega * dt
    theta_mid = s.theta + 0.5 * omega * dt
    step = s.d * k.v_o * dt
    r_new = s.r + step * np.array([np.cos(theta_mid), np.sin(theta_mid)])
    return AgentState(r=wrap_or_clamp(r_new, cfg), theta=wrap_angle(theta_new),
                      d=s.d, carrying=s.carrying, id=s.id)


# ----- reduced nondimensional dynamics -----

def nondim_flow(psi: float, r: float, G_nd: float):
    """Time derivatives (dpsi, dr) of the reduced constant-gradient system."""
    if r <= 0:
        raise ValueError("r must be > 0")
    return (G_nd - 1.0 / r) * np.sin(psi), np.cos(psi)


def integrate_nondim(psi0: float, r0: float, G_nd: float, t_end: float,
                     dt: float = 1e-3):
    """RK4 trajectory of (psi, r); returns (t, psi, r) arrays."""
    n = int(round(t_end / dt))
    t = np.arange(n + 1) * dt
    psi = np.empty(n + 1)
    r = np.empty(n + 1)
    psi[0], r[0] = psi0, r0

    def f(y):
        dpsi, dr = nondim_flow(y[0], y[1], G_nd)
        return np.array([dpsi, dr])

    y = np.array([psi0, r0], dtype=float)
    for i in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        psi[i + 1], r[i + 1] = y
    return t, psi, r


def psi_linearized(t, a: float, b: float, G_nd: float):
    """Closed-form solution of psi'' = G^2 psi - 2 G psi' with psi(0)=a, psi'(0)=b.

    (Deviation from the orbit fixed point; valid while |psi - pi/2| stays
    small. The hyperbolic pair e^{(-1 +/- sqrt2) G t} reflects the saddle
    structure of the linearization.)
    """
    t = np.asarray(t, dtype=float)
    g = G_nd
    if g == 0:
        raise ValueError("G_nd must be nonzero")
    s2 = np.sqrt(2.0)
    return np.exp(-g * t) / (2.0 * g) * (
        s2 * (b + a * g) * np.sinh(s2 * g * t) + 2.0 * a * g * np.cosh(s2 * g * t))


def lindstedt_frequency(alpha: float, G_nd: float) -> float:
    """Amplitude-corrected oscillation frequency G - alpha^2/G^2."""
    return G_nd - alpha ** 2 / G_nd ** 2


def psi_lindstedt(t, alpha: float, beta: float, G_nd: float):
    """Weakly nonlinear orbit oscillation: psi_tilde = 2 alpha cos(beta + (G - alpha^2/G^2) t)."""
    t = np.asarray(t, dtype=float)
    return 2.0 * alpha * np.cos(beta + lindstedt_frequency(alpha, G_nd) * t)


def lindstedt_coefficients(psi0: float, dpsi0: float, G_nd: float,
                           n_iter: int = 20):
    """(alpha, beta) matching psi_tilde(0) = psi0 and psi_tilde'(0) = dpsi0.

    The frequency depends on alpha, so solve the small fixed point
    2 alpha = hypot(psi0, dpsi0/omega(alpha)) by iteration from omega = G.
    """
    if G_nd <= 0:
        raise ValueError("G_nd must be > 0")
    omega = G_nd
    alpha = 0.5 * np.hypot(psi0, dpsi0 / omega)
    for _ in range(n_iter):
        omega = lindstedt_frequency(alpha, G_nd)
        if omega <= 0:
            raise ValueError("amplitude too large for the perturbative branch")
        alpha = 0.5 * np.hypot(psi0, dpsi0 / omega)
    beta = float(np.arctan2(-dpsi0 / omega, psi0))
    return float(alpha), beta


def simulate_constant_gradient(lam: float, k: KinematicParams, t_end: float,
                               dt: float, r0_scale: float = 1.02):
    """Full planar simulation in the analytic field grad c = -lambda r_hat.

    The agent starts near the predicted orbit (radius scaled by r0_scale,
    heading tangential) and turns with the raw linear law; the gradient is
    evaluated analytically rather than from a sampled grid. Returns (t, xy).
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    r_star = k.v_o / (k.G * lam)
    cfg = SimConfig(dt=dt, total_time=t_end, width=1e9, height=1e9,
                    boundary="walls", seed=0)
    s = AgentState(r=np.array([r0_scale * r_star, 0.0]), theta=np.pi / 2.0)
    n = int(round(t_end / dt))
    xy = np.empty((n + 1, 2))
    xy[0] = s.r
    for i in range(n):
        rad = np.hypot(s.r[0], s.r[1])
        grad = -lam * s.r / rad if rad > 0 else np.zeros(2)
        n_hat = np.array([-np.sin(s.theta), np.cos(s.theta)])
        omega = k.G * float(grad @ n_hat)
        s = step_kinematics(s, omega, k, cfg, dt)
        xy[i + 1] = s.r
    t = np.arange(n + 1) * dt
    return t, xy


def fitted_orbit_radius(xy: np.ndarray, tail: float = 0.5) -> float:
    """Mean distance from the origin over the last `tail` fraction of a path."""
    n = len(xy)
    cut = int((1.0 - tail) * n)
    return float(np.mean(np.hypot(xy[cut:, 0], xy[cut:, 1])))


def save_trajectory(path, t, states_per_tick) -> None:
    """CSV trace: t, id, x, y, theta, d, carrying."""
    with open(str(path), "w") as fh:
        fh.write("t,id,x,y,theta,d,carrying\n")
        for ti, states in zip(t, states_per_tick):
            for s in states:
                fh.write(f"{ti:.6f},{s.id},{s.r[0]:.9f},{s.r[1]:.9f},"
                         f"{s.theta:.9f},{s.d},{s.carrying}\n")
