"""Photormone field: deposition, exponential decay, optional diffusion, sensing.

The field c(x, t) obeys  dc/dt = k_plus * rho_a(x) - k_minus * c + D_c lap(c)
where rho_a is the summed source coverage (1 inside each agent's production
spot). Production and decay are integrated exactly per tick:

    c <- c * exp(-k_minus dt) + (k_plus rho / k_minus) * (1 - exp(-k_minus dt))

which is the closed-form solution for sources held fixed over the tick, so a
source-free field decays to machine precision and a covered cell relaxes to
k_plus/k_minus without time-step error. Diffusion, when enabled, is an
operator-split explicit 5-point step afterwards.

Cell centers sit at ((i+0.5)h, (j+0.5)h); values are indexed [ix, iy].
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

CFL_DIFFUSION = 0.25


@dataclass
class SourceFootprint:
    """One production spot. radius is the true half-width of the spot."""

    center: np.ndarray
    radius: float
    profile: str = "disk"     # "disk" | "gaussian"
    density: float = 1.0      # local rho_a contribution (sources superpose)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("footprint radius must be > 0")
        if self.profile not in ("disk", "gaussian"):
            raise ValueError(f"unknown footprint profile {self.profile!r}")


@dataclass
class PhotormoneGrid:
    nx: int
    ny: int
    h: float                  # cell size, m
    k_plus: float             # production rate, 1/s per unit coverage
    k_minus: float            # decay rate, 1/s
    D_c: float = 0.0          # diffusion coefficient, m^2/s
    boundary: str = "periodic"  # "periodic" | "neumann"
    t: float = 0.0
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2x2 cells")
        if self.h <= 0 or self.k_minus <= 0 or self.k_plus < 0 or self.D_c < 0:
            raise ValueError("bad field parameters")
        if self.boundary not in ("periodic", "neumann"):
            raise ValueError(f"unknown grid boundary {self.boundary!r}")
        if self.values is None:
            self.values = np.zeros((self.nx, self.ny))
        else:
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != (self.nx, self.ny):
                raise ValueError("values shape does not match nx, ny")

    @property
    def width(self) -> float:
        return self.nx * self.h

    @property
    def height(self) -> float:
        return self.ny * self.h

    @property
    def saturation(self) -> float:
        """Fixed point of a fully covered cell (rho = 1)."""
        return self.k_plus / self.k_minus

    def total(self) -> float:
        """Integral of c over the domain (sum * h^2)."""
        return float(self.values.sum() * self.h * self.h)


def make_grid(width: float, height: float, h: float, k_plus: float, k_minus: float,
              D_c: float = 0.0, boundary: str = "periodic") -> PhotormoneGrid:
    nx = int(round(width / h))
    ny = int(round(height / h))
    return PhotormoneGrid(nx=nx, ny=ny, h=h, k_plus=k_plus, k_minus=k_minus,
                          D_c=D_c, boundary=boundary)


def _stamp(grid: PhotormoneGrid, src: SourceFootprint):
    """Index arrays and weights of a footprint on the grid."""
    support = src.radius if src.profile == "disk" else 3.0 * src.radius
    cx, cy = src.center
    h = grid.h
    i0 = int(np.floor((cx - support) / h - 0.5))
    i1 = int(np.ceil((cx + support) / h - 0.5)) + 1
    j0 = int(np.floor((cy - support) / h - 0.5))
    j1 = int(np.ceil((cy + support) / h - 0.5)) + 1
    ii = np.arange(i0, i1)
    jj = np.arange(j0, j1)
    if grid.boundary == "periodic":
        # window may not exceed the domain, otherwise wrapped cells double-count
        if len(ii) > grid.nx or len(jj) > grid.ny:
            raise ValueError("footprint larger than periodic domain")
        ix = ii % grid.nx
        jy = jj % grid.ny
    else:
        keep_i = (ii >= 0) & (ii < grid.nx)
        keep_j = (jj >= 0) & (jj < grid.ny)
        ii, jj = ii[keep_i], jj[keep_j]
        ix, jy = ii, jj
    dx = (ii + 0.5) * h - cx
    dy = (jj + 0.5) * h - cy
    d2 = dx[:, None] ** 2 + dy[None, :] ** 2
    if src.profile == "disk":
        w = (d2 <= src.radius ** 2).astype(float)
    else:
        w = np.exp(-d2 / (2.0 * src.radius ** 2))
        w[d2 > support ** 2] = 0.0
    return ix, jy, w * src.density


def coverage(grid: PhotormoneGrid, sources) -> np.ndarray:
    """Summed rho_a on the grid (sources superpose, no cap)."""
    rho = np.zeros_like(grid.values)
    for src in sources:
        ix, jy, w = _stamp(grid, src)
        rho[np.ix_(ix, jy)] += w
    return rho


def _laplacian(v: np.ndarray, h: float, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        lap = (np.roll(v, 1, 0) + np.roll(v, -1, 0) +
               np.roll(v, 1, 1) + np.roll(v, -1, 1) - 4.0 * v)
    else:
        p = np.pad(v, 1, mode="edge")  # zero normal gradient
        lap = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * v)
    return lap / (h * h)


def step_field(grid: PhotormoneGrid, sources, dt: float) -> None:
    """Advance the field by dt with the given sources held fixed."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0:
        return
    f = np.exp(-grid.k_minus * dt)
    grid.values *= f
    amp = grid.saturation * (1.0 - f)
    for src in sources:
        ix, jy, w = _stamp(grid, src)
        grid.values[np.ix_(ix, jy)] += amp * w
    if grid.D_c > 0.0:
        mu = dt * grid.D_c / (grid.h * grid.h)
        if mu > CFL_DIFFUSION:
            raise ValueError(
                f"diffusion CFL violated: dt*D_c/h^2 = {mu:.3g} > {CFL_DIFFUSION}")
        grid.values += dt * grid.D_c * _laplacian(grid.values, grid.h, grid.boundary)
    grid.t += dt


def sample_bilinear(grid: PhotormoneGrid, p) -> float:
    """Bilinearly interpolated field value at a point.

    Periodic grids wrap; wall grids clamp to the nearest cell center at the
    edges (constant extrapolation over the outer half-cell).
    """
    x, y = float(p[0]), float(p[1])
    h = grid.h
    u = x / h - 0.5
    v = y / h - 0.5
    if grid.boundary == "periodic":
        i0 = int(np.floor(u))
        j0 = int(np.floor(v))
        fu = u - i0
        fv = v - j0
        i1 = (i0 + 1) % grid.nx
        j1 = (j0 + 1) % grid.ny
        i0 %= grid.nx
        j0 %= grid.ny
    else:
        u = min(max(u, 0.0), grid.nx - 1.0)
        v = min(max(v, 0.0), grid.ny - 1.0)
        i0 = min(int(np.floor(u)), grid.nx - 2)
        j0 = min(int(np.floor(v)), grid.ny - 2)
        fu = u - i0
        fv = v - j0
        i1 = i0 + 1
        j1 = j0 + 1
    c = grid.values
    return float((1 - fu) * (1 - fv) * c[i0, j0] + fu * (1 - fv) * c[i1, j0] +
                 (1 - fu) * fv * c[i0, j1] + fu * fv * c[i1, j1])


def sensor_pair_read(grid: PhotormoneGrid, r, theta: float, l_s: float):
    """Left/right sensor readings at r +/- (l_s/2) n, n = (-sin th, cos th)."""
    n = np.array([-np.sin(theta), np.cos(theta)])
    r = np.asarray(r, dtype=float)
    c_left = sample_bilinear(grid, r + 0.5 * l_s * n)
    c_right = sample_bilinear(grid, r - 0.5 * l_s * n)
    return c_left, c_right


def greens_point_source(x, t: float, alpha: float, D_c: float, k_hat: float,
                        rel_tol: float = 1e-9) -> float:
    """Reference solution for a point source of strength alpha at the origin.

    Nondimensional time (unit decay rate):
        c(x, t) = alpha k_hat * int_0^t e^{-s} exp(-|x|^2/(4 D_c s)) / (4 pi D_c s) ds
    The integrand is singular at |x| = 0, so only off-origin points are valid.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if D_c <= 0:
        raise ValueError("D_c must be > 0")
    r2 = float(np.dot(np.asarray(x, dtype=float), np.asarray(x, dtype=float)))
    if r2 == 0.0:
        raise ValueError("Green's-function oracle is singular at |x| = 0")
    if t == 0.0 or alpha == 0.0:
        return 0.0

    def integrand(s):
        return np.exp(-s - r2 / (4.0 * D_c * s)) / (4.0 * np.pi * D_c * s)

    # split at the saddle-ish scale so quad resolves the boundary layer
    split = min(t, max(r2 / (4.0 * D_c), 1e-12))
    val1, _ = quad(integrand, 0.0, split, epsabs=0.0, epsrel=rel_tol, limit=200)
    val2 = 0.0
    if split < t:
        val2, _ = quad(integrand, split, t, epsabs=0.0, epsrel=rel_tol, limit=200)
    return float(alpha * k_hat * (val1 + val2))


def save_grid(grid: PhotormoneGrid, path) -> None:
    """Write the field as CSV (one row per y index) with a metadata header."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt") as fh:
        fh.write(f"# nx={grid.nx} ny={grid.ny} h={grid.h!r} t={grid.t!r}\n")
        np.savetxt(fh, grid.values.T, delimiter=",", fmt="%.17g")


def load_grid(path, k_plus: float = 0.0, k_minus: float = 1.0,
              D_c: float = 0.0, boundary: str = "periodic") -> PhotormoneGrid:
    """Read a field snapshot written by save_grid."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing grid header")
        meta = dict(tok.split("=") for tok in header[1:].split())
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    nx, ny = int(meta["nx"]), int(meta["ny"])
    if values.shape != (ny, nx):
        raise ValueError(f"grid payload {values.shape} does not match header ({ny}, {nx})")
    return PhotormoneGrid(nx=nx, ny=ny, h=float(meta["h"]), k_plus=k_plus,
                          k_minus=k_minus, D_c=D_c, boundary=boundary,
                          t=float(meta["t"]), values=values.T.copy())
