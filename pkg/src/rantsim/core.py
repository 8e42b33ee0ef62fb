"""Shared primitives: deterministic RNG streams, simulation config, geometry helpers.

Positions are plain numpy arrays of shape (2,) in metres; headings are angles
in radians kept in (-pi, pi].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def vec2(x: float, y: float) -> np.ndarray:
    return np.array([x, y], dtype=float)


def unit_heading(theta: float) -> np.ndarray:
    """Body axis p = (cos th, sin th)."""
    return np.array([np.cos(theta), np.sin(theta)])


def unit_normal(theta: float) -> np.ndarray:
    """Left normal n = (-sin th, cos th); sensors sit along +/- n."""
    return np.array([-np.sin(theta), np.cos(theta)])


def wrap_angle(theta: float) -> float:
    """Map any angle into (-pi, pi]."""
    th = (theta + np.pi) % TWO_PI - np.pi
    if th == -np.pi:
        th = np.pi
    return float(th)


class RngStream:
    """Deterministic random stream with stable per-agent substreams.

    Substreams are derived with SeedSequence spawn keys, so stream k is the
    same sequence regardless of how many other streams exist. Philox is
    counter-based, which keeps replay cheap and exact.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, k: int) -> "RngStream":
        """Independent stream k under the same top-level seed."""
        return RngStream(self.seed, k)

    def normal(self, scale: float = 1.0) -> float:
        return float(self._gen.normal(0.0, scale))

    def uniform(self, lo: float, hi: float) -> float:
        return float(self._gen.uniform(lo, hi))

    def bernoulli(self, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return bool(self._gen.random() < p)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def wiener_increment(rng: RngStream, dt: float) -> float:
    """Increment of a unit Wiener process over dt: N(0, dt). dt=0 gives 0."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0:
        return 0.0
    return rng.normal(np.sqrt(dt))


@dataclass
class SimConfig:
    """Global stepping and domain settings."""

    dt: float = 0.05            # controller/kinematics tick, s
    total_time: float = 600.0   # simulated duration, s
    width: float = 0.67         # domain size, m
    height: float = 0.56
    boundary: str = "walls"     # "walls" | "periodic"
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0 or self.total_time < 0:
            raise ValueError("dt must be > 0 and total_time >= 0")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("domain must have positive extent")
        if self.boundary not in ("walls", "periodic"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")

    def crossing_time(self, v_o: float) -> float:
        """Arena-width crossing time at speed v_o, a natural time scale."""
        return self.width / v_o


def wrap_or_clamp(p: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Apply the domain topology to a position.

    Periodic: wrap into [0, W) x [0, H). Walls: returned unchanged (the world
    step handles reflection; positions between steps are always inside).
    """
    if cfg.boundary == "periodic":
        q = np.array(p, dtype=float)
        q[0] %= cfg.width
        q[1] %= cfg.height
        return q
    return np.array(p, dtype=float)


def torus_delta(a: np.ndarray, b: np.ndarray, width: float, height: float) -> np.ndarray:
    """Minimum-image displacement a-b on the torus."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d[..., 0] -= width * np.round(d[..., 0] / width)
    d[..., 1] -= height * np.round(d[..., 1] / height)
    return d
