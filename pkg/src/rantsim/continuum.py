"""Continuum mean-field model: agent density, photormone, substrate.

Nondimensional system on a rectangle with no-flux boundaries:

    d(rho_a)/dt = lap(rho_a) - div[(C grad c + V (1 - rho_s) p_hat) rho_a]
    dc/dt       = D_c lap(c) + k_hat rho_a - c
    d(rho_s)/dt = (K/4) rho_s (1 + tanh(a_c (c - c_star)))
                               (1 + tanh(a_c (rho_a - rho_star)))

rho_a advects up the photormone gradient (strength C) and drifts along a
static orientation field p_hat at speed V throttled by local substrate
(1 - rho_s, clipped at 0). Substrate converts where both photormone and
agents exceed their thresholds; the sign of K selects deposition or removal.

Explicit Euler, donor-cell upwind advection in flux form (agent mass is
conserved to rounding), central 5-point diffusion with reflecting ghosts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CFL_SAFETY = 0.9


@dataclass
class ContinuumParams:
    C: float = 1.0          # phototaxis number, chi c_o / D_a
    K: float = 1.4433756729740645   # substrate conversion number, k_s l / v_o
    V: float = 1.1547005383792517   # drift number, v_o l / D_a
    D_c: float = 1.0        # photormone diffusion, D_c / (l^2 k_minus)
    k_hat: float = 1.0      # production over decay at reference density
    alpha_c: float = 100.0  # threshold sharpness
    rho_star: float = 0.3
    c_star: float = 0.01


def continuum_groups(v_o: float, chi: float, D_a: float, k_plus: float,
                     k_minus: float, D_c: float, k_s: float,
                     rho_o: float = 1.0) -> dict:
    """Nondimensional groups from dimensional inputs (l = sqrt(D_c/k_minus),
    c_o = k_plus rho_o / k_minus)."""
    ell = np.sqrt(D_c / k_minus)
    c_o = k_plus * rho_o / k_minus
    return {
        "C": chi * c_o / D_a,
        "K": k_s * ell / v_o,
        "V": v_o * ell / D_a,
        "D_c": D_c / (ell ** 2 * k_minus),
        "k_hat": k_plus * rho_o / (k_minus * c_o),
        "length_scale": ell,
    }


@dataclass
class ContinuumFields:
    h: float
    rho_a: np.ndarray       # (nx, ny)
    c: np.ndarray
    rho_s: np.ndarray
    px: np.ndarray          # static orientation field
    py: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        shapes = {a.shape for a in (self.rho_a, self.c, self.rho_s, self.px, self.py)}
        if len(shapes) != 1:
            raise ValueError("all fields must share one shape")
        if self.h <= 0:
            raise ValueError("h must be > 0")

    @property
    def shape(self):
        return self.rho_a.shape


def mass_report(f: ContinuumFields):
    """(agent mass, photormone mass, substrate mass), integrals over the domain."""
    a = f.h * f.h
    return (float(f.rho_a.sum() * a), float(f.c.sum() * a), float(f.rho_s.sum() * a))


def _lap(v: np.ndarray, h: float) -> np.ndarray:
    p = np.pad(v, 1, mode="edge")
    return (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * v) / (h * h)


def _grad(v: np.ndarray, h: float):
    p = np.pad(v, 1, mode="edge")
    gx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * h)
    gy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * h)
    return gx, gy


def velocity(f: ContinuumFields, p: ContinuumParams):
    """Cell-centered advection velocity of rho_a."""
    gx, gy = _grad(f.c, f.h)
    throttle = np.clip(1.0 - f.rho_s, 0.0, None)
    ux = p.C * gx + p.V * throttle * f.px
    uy = p.C * gy + p.V * throttle * f.py
    return ux, uy


def _upwind_divergence(rho: np.ndarray, ux: np.ndarray, uy: np.ndarray,
                       h: float) -> np.ndarray:
    """div(u rho) with donor-cell fluxes; boundary faces carry zero flux."""
    fx = np.zeros((rho.shape[0] + 1, rho.shape[1]))
    ufx = 0.5 * (ux[:-1, :] + ux[1:, :])
    fx[1:-1, :] = np.where(ufx > 0.0, ufx * rho[:-1, :], ufx * rho[1:, :])
    fy = np.zeros((rho.shape[0], rho.shape[1] + 1))
    ufy = 0.5 * (uy[:, :-1] + uy[:, 1:])
    fy[:, 1:-1] = np.where(ufy > 0.0, ufy * rho[:, :-1], ufy * rho[:, 1:])
    return (fx[1:, :] - fx[:-1, :]) / h + (fy[:, 1:] - fy[:, :-1]) / h


def cfl_limit(f: ContinuumFields, p: ContinuumParams) -> float:
    """Largest stable dt at the current state (with the safety factor)."""
    ux, uy = velocity(f, p)
    umax = float(np.max(np.abs(ux)) + np.max(np.abs(uy)))
    diff = f.h * f.h / (4.0 * max(1.0, p.D_c))
    adv = f.h / umax if umax > 0 else np.inf
    return CFL_SAFETY * min(diff, adv)


def step_continuum(f: ContinuumFields, p: ContinuumParams, dt: float,
                   freeze_rho_a: bool = False) -> None:
    """One explicit Euler step; raises if dt violates the CFL bound."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    ux, uy = velocity(f, p)
    umax = float(np.max(np.abs(ux)) + np.max(np.abs(uy)))
    limit = CFL_SAFETY * min(f.h * f.h / (4.0 * max(1.0, p.D_c)),
                             f.h / umax if umax > 0 else np.inf)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} exceeds CFL limit {limit:.3g}")
    dc = p.D_c * _lap(f.c, f.h) + p.k_hat * f.rho_a - f.c
    ds = 0.25 * p.K * f.rho_s * (1.0 + np.tanh(p.alpha_c * (f.c - p.c_star))) \
        * (1.0 + np.tanh(p.alpha_c * (f.rho_a - p.rho_star)))
    if not freeze_rho_a:
        da = _lap(f.rho_a, f.h) - _upwind_divergence(f.rho_a, ux, uy, f.h)
        f.rho_a += dt * da
    f.c += dt * dc
    f.rho_s += dt * ds
    f.t += dt
    m = min(float(f.rho_a.min()), float(f.rho_s.min()))
    if m < -1e-12:
        raise RuntimeError(f"negative density after step: min = {m:.3e}")


def run_continuum(f: ContinuumFields, p: ContinuumParams, t_end: float,
                  dt: float = None, record_every: int = 20,
                  freeze_rho_a: bool = False):
    """Advance to t_end; returns (times, mass_triples) sampled along the way.

    With dt=None the step adapts to the CFL limit each iteration (still
    deterministic: the state sequence is a pure function of the inputs).
    """
    times = [f.t]
    masses = [mass_report(f)]
    k = 0
    while f.t < t_end - 1e-12:
        step = dt if dt is not None else cfl_limit(f, p)
        step = min(step, t_end - f.t)
        step_continuum(f, p, step, freeze_rho_a=freeze_rho_a)
        k += 1
        if k % record_every == 0:
            times.append(f.t)
            masses.append(mass_report(f))
    if times[-1] != f.t:
        times.append(f.t)
        masses.append(mass_report(f))
    return np.array(times), np.array(masses)


# ----- presets -----

PRESET_DOMAIN = (8.0, 6.0)

_PRESET_PHYSICAL = dict(v_o=0.1, chi=0.005, D_a=0.005, k_plus=1.5, k_minus=1.5,
                        D_c=0.005)


def preset_params(name: str) -> ContinuumParams:
    k_s = 2.5 if name == "construction" else -2.5
    g = continuum_groups(k_s=k_s, **_PRESET_PHYSICAL)
    return ContinuumParams(C=g["C"], K=g["K"], V=g["V"], D_c=g["D_c"],
                           k_hat=g["k_hat"])


def load_preset(name: str, h: float = 0.05):
    """Initial fields and parameters for the two reference scenarios.

    construction: an annulus of agents (radii 1.0-1.3 around (5,4)) encircles
    a substrate disk (radius 0.5); p_hat points radially inward. K > 0.
    deconstruction: a Gaussian agent blob (center (4, 3.5), sigma 0.5) faces a
    substrate half-plane y > 4; p_hat = +y. K < 0.
    """
    if h > 0.1:
        raise ValueError("preset mesh must satisfy h <= 0.1")
    if name not in ("construction", "deconstruction"):
        raise ValueError(f"unknown preset {name!r}")
    W, H = PRESET_DOMAIN
    nx, ny = int(round(W / h)), int(round(H / h))
    x = (np.arange(nx) + 0.5) * h
    y = (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(x, y, indexing="ij")
    if name == "construction":
        d = np.hypot(X - 5.0, Y - 4.0)
        rho_a = ((d >= 1.0) & (d <= 1.3)).astype(float)
        rho_s = (d <= 0.5).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            px = np.where(d > 0, -(X - 5.0) / np.where(d > 0, d, 1.0), 0.0)
            py = np.where(d > 0, -(Y - 4.0) / np.where(d > 0, d, 1.0), 0.0)
    else:
        rho_a = np.exp(-((X - 4.0) ** 2 + (Y - 3.5) ** 2) / (2.0 * 0.5 ** 2))
        rho_s = (Y > 4.0).astype(float)
        px = np.zeros_like(X)
        py = np.ones_like(X)
    fields = ContinuumFields(h=h, rho_a=rho_a, c=np.zeros_like(rho_a),
                             rho_s=rho_s, px=px, py=py)
    return fields, preset_params(name)
