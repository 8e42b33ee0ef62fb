"""Scenario execution: world builders, run directories, sweeps, trap protocols.

Everything here is a pure function of (scenario, seed): initial poses come
from the seed's substream 0, per-agent noise from substreams 1+id, and all
outputs are plain CSV / key=value text so runs can be diffed byte for byte.
"""
from __future__ import annotations

import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .agent import (AgentState, KinematicParams, fitted_orbit_radius,
                    simulate_constant_gradient)
from .config import ConfigError, Scenario
from .continuum import load_preset, mass_report, run_continuum
from .controller import BehaviorParams
from .core import RngStream, SimConfig
from .metrics import (cluster_elements, covariance_ellipse,
                      mean_pairwise_distance, trajectory_curvature,
                      write_metrics_csv)
from .photormone import SourceFootprint, save_grid, step_field
from .trap import (TrapRegime, critical_gain, detect_trap,
                   implicit_radius_large_decay, predict,
                   trapping_radius_geometric, unwrap_periodic)
from .world import (Arena, WorldParams, WorldState, layout_blob,
                    layout_boundary, layout_layers, layout_mixed, make_world,
                    run_world, seed_linear_gradient, seed_photormone_disk)

WORLD_MODES = ("construction", "deconstruction", "robustness_2x2")

# Fig. 4(a)-style case grid: thresholds off/on crossed with pure random walk
# (C=0) and pure phototaxis (C=1).
ROBUSTNESS_CASES = {
    "A": {"behavior.thresholds": "disabled", "behavior.C": 0.0},
    "B": {"behavior.thresholds": "disabled", "behavior.C": 1.0},
    "C": {"behavior.thresholds": "enabled", "behavior.C": 1.0},
    "D": {"behavior.thresholds": "enabled", "behavior.C": 0.0},
}


# ----- world construction from a scenario -----

def _layout_elements(scn: Scenario, arena: Arena):
    kind = scn["substrate.layout"]
    n = int(scn["substrate.n"])
    radius = float(scn["substrate.radius"])
    if kind == "none" or n == 0:
        return []
    if kind == "boundary":
        return layout_boundary(n, arena, radius)
    if kind == "layers":
        return layout_layers(int(scn["substrate.layers"]), arena, radius,
                             max_elements=n)
    if kind == "blob":
        return layout_blob(n, arena, radius)
    if kind == "mixed":
        return layout_mixed(n, arena, radius)
    raise ConfigError(f"unknown substrate.layout {kind!r}")


def _initial_agents(scn: Scenario, arena: Arena, seed: int):
    """Agents start inside the construction area, poses from substream 0."""
    rng = RngStream(seed).substream(0)
    x0, y0, x1, y1 = arena.construction_rect
    pad = float(scn["agents.body_radius"])
    out = []
    for i in range(int(scn["agents.n"])):
        pos = np.array([rng.uniform(x0 + pad, x1 - pad),
                        rng.uniform(y0 + pad, y1 - pad)])
        out.append(AgentState(r=pos, theta=rng.uniform(-np.pi, np.pi), id=i))
    return out


def build_world(scn: Scenario, seed: int) -> WorldState:
    if scn.mode not in WORLD_MODES:
        raise ConfigError(f"build_world does not handle mode {scn.mode!r}")
    if scn.mode == "robustness_2x2":
        case = scn["case"]
        if case not in ROBUSTNESS_CASES:
            raise ConfigError(f"robustness case must be one of "
                              f"{sorted(ROBUSTNESS_CASES)}, got {case!r}")
        scn = scn.with_overrides(ROBUSTNESS_CASES[case])

    cfg = SimConfig(dt=float(scn["sim.dt"]), total_time=float(scn["sim.duration"]),
                    width=float(scn["arena.width"]), height=float(scn["arena.height"]),
                    boundary="walls", seed=seed)
    arena = Arena(width=cfg.width, height=cfg.height,
                  construction_width=float(scn["arena.construction_width"]),
                  construction_height=float(scn["arena.construction_height"]))
    kin = KinematicParams(v_o=float(scn["agents.v_o"]), G=float(scn["agents.G"]),
                          l_s=float(scn["agents.l_s"]), l_w=float(scn["agents.l_w"]))
    sat = float(scn["field.k_plus"]) / float(scn["field.k_minus"])
    beh = BehaviorParams(C=float(scn["behavior.C"]), K=float(scn["behavior.K"]),
                         alpha=float(scn["behavior.alpha"]), b=float(scn["behavior.b"]),
                         l_s=kin.l_s, c_max=sat,
                         c_bar=float(scn["behavior.c_bar_frac"]) * sat,
                         delta_c=float(scn["behavior.delta_c_frac"]) * sat,
                         thresholds=scn["behavior.thresholds"],
                         carry_time_disabled=float(scn["behavior.carry_time_disabled"]),
                         maneuver_time=float(scn["behavior.maneuver_time"]),
                         carry_min_time=float(scn["behavior.carry_min_time"]))
    params = WorldParams(kin=kin, beh=beh, control=scn["agents.control"],
                         w=float(scn["field.w"]), footprint=scn["field.footprint"],
                         body_radius=float(scn["agents.body_radius"]),
                         detect_range=float(scn["detect.range"]),
                         cone_half_angle=np.deg2rad(float(scn["detect.cone_deg"])),
                         project_to_construction=bool(scn["field.project"]))
    world = make_world(cfg, params, arena=arena,
                       agents=_initial_agents(scn, arena, seed),
                       elements=_layout_elements(scn, arena),
                       grid_h=scn["field.grid_h"],
                       k_plus=float(scn["field.k_plus"]),
                       k_minus=float(scn["field.k_minus"]),
                       D_c=float(scn["field.D_c"]))
    _apply_seed_field(scn, world, arena)
    return world


def _apply_seed_field(scn: Scenario, world: WorldState, arena: Arena) -> None:
    kind = scn["seed_field.kind"]
    if kind == "none":
        return
    if kind == "disk":
        cx = scn["seed_field.x"]
        cy = scn["seed_field.y"]
        center = (float(cx) if cx is not None else 0.5 * arena.width,
                  float(cy) if cy is not None else 0.5 * arena.height)
        value = scn["seed_field.value"]
        value = float(value) if value is not None else world.grid.saturation
        seed_photormone_disk(world, center, float(scn["seed_field.diameter"]), value)
    elif kind == "gradient":
        seed_linear_gradient(world, float(scn["seed_field.slope"]))
    else:
        raise ConfigError(f"unknown seed_field.kind {kind!r}")
    if world._mask is not None:
        world.grid.values *= world._mask


def kappa_star(w: float, l_s: float, v_o: float, k_plus: float,
               k_minus: float, G: float) -> float:
    """Curvature normalization 1/(l_s r*) from the trap prediction.

    Falls back to the geometric radius when the regime has no bound orbit at
    this gain (kappa_bar / kappa_star is then simply a scale, not a claim).
    """
    regime = TrapRegime.from_physical(w=w, l_s=l_s, v_o=v_o,
                                      k_plus=k_plus, k_minus=k_minus)
    pred = predict(regime, G_nd=G / v_o)
    r_nd = pred.r_star if pred.r_star is not None else \
        trapping_radius_geometric(regime.L_w)
    return 1.0 / (l_s * r_nd)


# ----- run directories -----

def _atomic_dir(outdir):
    outdir = Path(outdir)
    tmp = outdir.with_name(outdir.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    return outdir, tmp


def _commit_dir(tmp: Path, final: Path) -> None:
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def run(scn: Scenario, seed: int, outdir) -> Path:
    """Execute one scenario replica into an atomically-created directory."""
    final, tmp = _atomic_dir(outdir)
    t0 = time.monotonic()
    try:
        (tmp / "config.txt").write_text(scn.to_text() + f"seed = {seed}\n")
        if scn.mode in WORLD_MODES:
            summary = _run_world_scenario(scn, seed, tmp)
        elif scn.mode == "constant_gradient":
            summary = _run_constant_gradient(scn, tmp)
        elif scn.mode in ("single_trap", "multi_trap_phase"):
            summary = _run_trap_scenario(scn, seed, tmp)
        elif scn.mode == "continuum":
            summary = _run_continuum_scenario(scn, tmp)
        else:
            raise ConfigError(f"unknown scenario mode {scn.mode!r}")
        summary = {"mode": scn.mode, "seed": seed, **summary,
                   "elapsed_s": f"{time.monotonic() - t0:.2f}"}
        _write_summary(tmp / "summary.txt", summary)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit_dir(tmp, final)
    return final


def _write_summary(path: Path, kv: dict) -> None:
    with open(path, "w") as fh:
        for k, v in kv.items():
            fh.write(f"{k} = {v}\n")


def read_summary(rundir) -> dict:
    out = {}
    for line in (Path(rundir) / "summary.txt").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# ----- world scenarios (construction family) -----

def _write_elements_csv(path, world: WorldState, t: float, append: bool) -> None:
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        if not append:
            fh.write("t,id,x,y,radius,carried_by\n")
        for i in range(world.n_elements):
            fh.write(f"{t:.6g},{i},{world.elem_pos[i][0]:.9g},"
                     f"{world.elem_pos[i][1]:.9g},{world.elem_radius[i]:.6g},"
                     f"{world.elem_carrier[i]}\n")


def _append_trace(path, times, poses, append: bool) -> None:
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        if not append:
            fh.write("t,id,x,y,theta,d,carrying\n")
        for ti, frame in zip(times, poses):
            for aid, row in enumerate(frame):
                fh.write(f"{ti:.6g},{aid},{row[0]:.9g},{row[1]:.9g},"
                         f"{row[2]:.9g},{int(row[3])},{int(row[4])}\n")


def snapshot_metrics(world: WorldState, poses: np.ndarray, dt_rec: float,
                     kstar: float, window: float = 30.0) -> dict:
    """One metrics row from the current world plus a recent pose window."""
    arena = world.arena
    free = world.free_mask()
    rep = cluster_elements(world.elem_pos[free], world.elem_radius[free],
                           delta=0.025, region=arena.construction_rect,
                           region_area=arena.construction_area)
    inside = arena.in_construction(world.elem_pos[free])
    ell = covariance_ellipse(world.elem_pos[free][inside])
    kappas = []
    if len(poses):
        n_win = max(2, int(round(window / dt_rec)))
        tail = poses[-n_win:]
        for a in range(tail.shape[1]):
            kappas.append(trajectory_curvature(tail[:, a, :2], tail[:, a, 2],
                                               world.params.kin.v_o, dt_rec))
    agent_pos = np.array([a.r for a in world.agents])
    return {
        "t": world.t,
        "n_c": rep.n_c,
        "covered_fraction": rep.covered_fraction,
        "area_mean_norm": rep.area_mean_norm,
        "area_max_norm": rep.area_max / arena.construction_area if rep.n_c else 0.0,
        "lambda_a": ell.semi_major ** 2 if ell is not None else None,
        "lambda_b": ell.semi_minor ** 2 if ell is not None else None,
        "ellipse_L": ell.circumference if ell is not None else None,
        "kappa_norm": float(np.mean(kappas)) / kstar if kappas else None,
        "mean_pair_dist": mean_pairwise_distance(agent_pos),
    }


def _run_world_scenario(scn: Scenario, seed: int, outdir: Path) -> dict:
    world = build_world(scn, seed)
    dt = float(scn["sim.dt"])
    duration = float(scn["sim.duration"])
    snap_every = float(scn["sim.snapshot_every"])
    early = float(scn["sim.early_stop"])
    rec = int(scn["sim.record_every"])
    kstar = kappa_star(w=float(scn["field.w"]), l_s=float(scn["agents.l_s"]),
                       v_o=float(scn["agents.v_o"]),
                       k_plus=float(scn["field.k_plus"]),
                       k_minus=float(scn["field.k_minus"]),
                       G=float(scn["agents.G"]))

    elements_path = outdir / "elements.csv"
    trace_path = outdir / "trace.csv"
    _write_elements_csv(elements_path, world, 0.0, append=False)
    n_in0 = int(world.arena.in_construction(world.elem_pos).sum())

    metrics_rows = [snapshot_metrics(world, np.empty((0, 0, 5)), dt * rec, kstar)]
    pose_window = None
    appended = False
    t_done = 0.0
    stopped_early = False
    while t_done < duration - 1e-9:
        chunk = min(snap_every, duration - t_done)
        times, poses, _ = run_world(world, chunk, dt=dt, record_every=rec,
                                    early_stop=early)
        _append_trace(trace_path, times, poses, append=appended)
        appended = True
        pose_window = poses if pose_window is None else \
            np.concatenate([pose_window, poses])[-len(poses) * 2:]
        _write_elements_csv(elements_path, world, world.t, append=True)
        metrics_rows.append(snapshot_metrics(world, pose_window, dt * rec, kstar))
        t_done = world.t
        n_expected = len(range(0, int(round(chunk / dt)), max(rec, 1)))
        if len(times) < n_expected:
            stopped_early = True
            break
    write_metrics_csv(outdir / "metrics.csv", metrics_rows)
    save_grid(world.grid, outdir / "field_final.csv.gz")

    n_in = int(world.arena.in_construction(world.elem_pos).sum())
    last = metrics_rows[-1]
    return {
        "t_end": f"{world.t:.6g}",
        "stopped_early": stopped_early,
        "n_elements_in_area_initial": n_in0,
        "n_elements_in_area_final": n_in,
        "signed_flux": n_in - n_in0,
        "n_c_final": last["n_c"],
        "covered_fraction_final": f"{last['covered_fraction']:.6g}",
        "area_max_norm_final": f"{last['area_max_norm']:.6g}",
        "ellipse_L_final": ("nan" if last["ellipse_L"] is None
                            else f"{last['ellipse_L']:.6g}"),
        "kappa_norm_final": ("nan" if last["kappa_norm"] is None
                             else f"{last['kappa_norm']:.6g}"),
        "state_digest": world.state_digest(),
    }


# ----- constant-gradient scenario -----

def _run_constant_gradient(scn: Scenario, outdir: Path) -> dict:
    kin = KinematicParams(v_o=float(scn["cg.v_o"]), G=float(scn["cg.G"]),
                          l_s=float(scn["cg.l_s"]), l_w=float(scn["cg.l_w"]))
    lambdas = [float(x) for x in np.atleast_1d(scn["cg.lambdas"])]
    rows = []
    for lam in lambdas:
        r_pred = kin.v_o / (kin.G * lam)
        period = 2.0 * np.pi * r_pred / kin.v_o
        dt = period / float(scn["cg.steps_per_period"])
        t_end = float(scn["cg.periods"]) * period
        _, xy = simulate_constant_gradient(lam, kin, t_end, dt,
                                           r0_scale=float(scn["cg.r0_scale"]))
        r_fit = fitted_orbit_radius(xy)
        rows.append((lam, r_fit, r_pred, r_fit * kin.G * lam / kin.v_o))
    with open(outdir / "radii.csv", "w") as fh:
        fh.write("lambda,r_fit,r_pred,r_times_G\n")
        for row in rows:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
    lam = np.log([r[0] for r in rows])
    rad = np.log([r[1] for r in rows])
    slope = float(np.polyfit(lam, rad, 1)[0]) if len(rows) > 1 else float("nan")
    return {"n_lambdas": len(rows), "loglog_slope": f"{slope:.6g}",
            "max_rG_error": f"{max(abs(r[3] - 1.0) for r in rows):.3e}"}


# ----- trap protocols -----

@dataclass
class TrapSetup:
    """Nondimensional trap problem plus the concrete world realizing it."""
    regime: TrapRegime
    G_nd: float
    n_agents: int
    seed: int
    domain: float = 0.2
    l_s: float = 0.01
    v_o: float = 0.04
    dt: float = 0.01
    h_factor: float = 8.0
    footprint: str = "disk"

    @property
    def k_minus(self) -> float:
        return self.v_o / (self.regime.L_minus * self.l_s)

    @property
    def G_dim(self) -> float:
        return self.G_nd * self.v_o

    def world(self) -> WorldState:
        cfg = SimConfig(dt=self.dt, total_time=1.0, width=self.domain,
                        height=self.domain, boundary="periodic", seed=self.seed)
        kin = KinematicParams(v_o=self.v_o, G=self.G_dim, l_s=self.l_s,
                              l_w=3.0 * self.l_s)
        params = WorldParams(kin=kin, beh=BehaviorParams(l_s=self.l_s),
                             control="linear", w=self.regime.L_w * self.l_s,
                             footprint=self.footprint)
        return make_world(cfg, params, agents=[], elements=[],
                          grid_h=self.l_s / self.h_factor,
                          k_plus=self.regime.k_hat * self.k_minus,
                          k_minus=self.k_minus)

    def orbit_radius_nd(self) -> float:
        """Prewarm radius for the release scaffold.

        Always the geometric radius: the inner-sensor circle is fully lit
        only for orbits at or below (L_w+1)/4, so that is where a released
        agent can sustain itself regardless of the decay length.  Slow-decay
        radius predictions are compared against the settled orbit afterwards,
        not baked into the release state.
        """
        return trapping_radius_geometric(self.regime.L_w)


def prewarm_orbit(world: WorldState, center, radius_m: float, n_agents: int,
                  t_warm: float, dt: float) -> None:
    """Drive a scripted source around the target orbit to pre-build the field.

    Agents are not simulated here; one production spot of density n_agents
    moves on the exact circle, standing in for a co-located group, so the
    released field is the steady annulus of the theory scaled by n.
    """
    v_o = world.params.kin.v_o
    omega = v_o / radius_m
    n = int(round(t_warm / dt))
    for i in range(n):
        p = omega * (i + 1) * dt
        sources = [SourceFootprint(
            center=np.array([center[0] + radius_m * np.cos(p),
                             center[1] + radius_m * np.sin(p)]),
            radius=world.params.footprint_radius,
            profile=world.params.footprint,
            density=float(n_agents))]
        step_field(world.grid, sources, dt)
    world._warm_phase = omega * n * dt


def simulate_trap_release(setup: TrapSetup, t_free: float = 90.0,
                          window: float = 30.0, jitter: float = 0.02):
    """Warm the annulus, place a co-located group on it, free-run, classify.

    Returns (trapped, radius_nd, xy_unwrapped_per_agent). All agents are
    released at the same orbit phase (up to per-agent jitter): the group then
    paints one shared spot whose field is n times the single-agent field, the
    configuration behind the 1/n gain scaling. Seeds enter through the pose
    jitter; the dynamics proper are deterministic under the linear turn law.
    """
    world = setup.world()
    center = (0.5 * setup.domain, 0.5 * setup.domain)
    r_nd = setup.orbit_radius_nd()
    r_m = r_nd * setup.l_s
    t_warm = max(6.0 / setup.k_minus, 4.0 * 2.0 * np.pi * r_m / setup.v_o)
    prewarm_orbit(world, center, r_m, setup.n_agents, t_warm, setup.dt)

    rng = RngStream(setup.seed).substream(0)
    phi = world._warm_phase + jitter * rng.uniform(-np.pi, np.pi) / 8.0
    rad = r_m * (1.0 + jitter * rng.uniform(-1.0, 1.0))
    pos = np.array([center[0] + rad * np.cos(phi),
                    center[1] + rad * np.sin(phi)])
    # One pose draw for the whole group: co-location is an invariant of the
    # deterministic dynamics, but any per-agent offset grows exponentially
    # (e-folding near one orbit period) until the stack decoheres, so seeds
    # must perturb the group rigidly to probe the co-located configuration.
    world.set_agents([AgentState(r=pos.copy(), theta=float(phi + np.pi / 2.0),
                                 id=i) for i in range(setup.n_agents)])

    _, poses, _ = run_world(world, t_free, dt=setup.dt)
    trapped_all = True
    radii = []
    trajs = []
    for a in range(setup.n_agents):
        xy = unwrap_periodic(poses[:, a, :2], setup.domain, setup.domain)
        ok, r_fit, _ = detect_trap(xy, setup.dt, setup.l_s, r_nd, window=window)
        trapped_all = trapped_all and ok
        radii.append(r_fit / setup.l_s)
        trajs.append(xy)
    return trapped_all, float(np.mean(radii)), trajs


def simulate_trap_nucleation(setup: TrapSetup, t_run: float = 120.0,
                             window: float = 30.0):
    """Cold-start protocol: clustered agents plus a transient seed gradient.

    The seed ramp turns the group once; whether the wake then self-sustains is
    the trapping decision. Returns (trapped, radius_nd, xy per agent).
    """
    world = setup.world()
    center = np.array([0.5 * setup.domain, 0.5 * setup.domain])
    r_nd = setup.orbit_radius_nd()
    rng = RngStream(setup.seed).substream(0)
    agents = []
    for i in range(setup.n_agents):
        ang = rng.uniform(-np.pi, np.pi)
        rad = rng.uniform(0.0, 1.0) * setup.l_s
        pos = center + rad * np.array([np.cos(ang), np.sin(ang)])
        agents.append(AgentState(r=pos, theta=rng.uniform(-np.pi, np.pi), id=i))
    world.set_agents(agents)
    slope = setup.v_o / (setup.G_dim * 2.0 * r_nd * setup.l_s)
    seed_linear_gradient(world, slope, axis=1)

    _, poses, _ = run_world(world, t_run, dt=setup.dt)
    trapped_all = True
    radii = []
    trajs = []
    for a in range(setup.n_agents):
        xy = unwrap_periodic(poses[:, a, :2], setup.domain, setup.domain)
        ok, r_fit, _ = detect_trap(xy, setup.dt, setup.l_s, r_nd, window=window)
        trapped_all = trapped_all and ok
        radii.append(r_fit / setup.l_s)
        trajs.append(xy)
    return trapped_all, float(np.mean(radii)), trajs


def bisect_gain(regime: TrapRegime, n_agents: int, seed: int,
                g_lo: float, g_hi: float, n_iter: int = 7,
                domain: float = 0.2, t_free: float = 90.0,
                protocol: str = "orbit_release", h_factor: float = 8.0,
                dt: float = 0.01):
    """Bisection for the smallest sustaining gain; (G_c, radius_at_onset).

    g_lo must fail to trap and g_hi must trap, otherwise the bracket is
    widened once in the failing direction before giving up with ValueError.
    Narrow footprints (L_w near 1) need h_factor 16; the orbit diameter is
    then only a handful of cells at the default resolution.
    """
    sim = simulate_trap_release if protocol == "orbit_release" else \
        simulate_trap_nucleation

    def probe(g):
        setup = TrapSetup(regime=regime, G_nd=g, n_agents=n_agents,
                          seed=seed, domain=domain, h_factor=h_factor, dt=dt)
        if protocol == "orbit_release":
            return sim(setup, t_free=t_free)
        return sim(setup, t_run=t_free)

    lo_trap, _, _ = probe(g_lo)
    if lo_trap:
        g_lo = 0.5 * g_lo
        lo_trap, _, _ = probe(g_lo)
        if lo_trap:
            raise ValueError(f"lower bracket {g_lo:.4g} still traps")
    hi_trap, r_hi, _ = probe(g_hi)
    if not hi_trap:
        g_hi = 2.0 * g_hi
        hi_trap, r_hi, _ = probe(g_hi)
        if not hi_trap:
            raise ValueError(f"upper bracket {g_hi:.4g} does not trap")
    r_onset = r_hi
    for _ in range(n_iter):
        mid = np.sqrt(g_lo * g_hi)
        ok, r_mid, _ = probe(mid)
        if ok:
            g_hi, r_onset = mid, r_mid
        else:
            g_lo = mid
    return float(np.sqrt(g_lo * g_hi)), float(r_onset)


def simulate_coarsening(n_agents: int, G_dim: float, seed: int,
                        domain: float = 0.2, w: float = 0.03,
                        v_o: float = 0.04, l_s: float = 0.01,
                        k_plus: float = 1.5, k_minus: float = 1.5,
                        t_end: float = 240.0, dt: float = 0.01,
                        sample_every: float = 5.0,
                        seed_slope: float = None,
                        footprint: str = "gaussian"):
    """Free multi-agent run on the torus; returns (times, mean pairwise dist).

    Agents start uniformly at random in a decaying linear ramp that kicks
    everyone into rotation (a straight walker senses no contrast in its own
    wake, so without the ramp nothing ever nucleates); after the ramp fades
    the wakes are the only coupling and aggregation shows up as a falling
    mean pairwise distance. seed_slope defaults to the value whose induced
    turning radius equals the geometric trapping radius for this footprint.
    The gaussian footprint is the default here: hard-edged spots pin their
    traps to the grid and merging then stalls at whatever the capture phase
    produced, while smooth spots leave the traps free to wander and merge.
    """
    cfg = SimConfig(dt=dt, total_time=t_end, width=domain, height=domain,
                    boundary="periodic", seed=seed)
    kin = KinematicParams(v_o=v_o, G=G_dim, l_s=l_s, l_w=3.0 * l_s)
    params = WorldParams(kin=kin, beh=BehaviorParams(l_s=l_s),
                         control="linear", w=w, footprint=footprint)
    rng = RngStream(seed).substream(0)
    agents = [AgentState(r=np.array([rng.uniform(0.0, domain),
                                     rng.uniform(0.0, domain)]),
                         theta=rng.uniform(-np.pi, np.pi), id=i)
              for i in range(n_agents)]
    world = make_world(cfg, params, agents=agents, elements=[],
                       grid_h=l_s / 4.0, k_plus=k_plus, k_minus=k_minus)
    if seed_slope is None:
        seed_slope = v_o / (G_dim * trapping_radius_geometric(w / l_s) * l_s)
    seed_linear_gradient(world, seed_slope, axis=1)
    period = (domain, domain)
    times = [0.0]
    dists = [mean_pairwise_distance(np.array([a.r for a in agents]), period)]
    n_chunks = int(round(t_end / sample_every))
    for _ in range(n_chunks):
        run_world(world, sample_every, dt=dt, record_every=10 ** 9)
        times.append(world.t)
        dists.append(mean_pairwise_distance(
            np.array([a.r for a in world.agents]), period))
    return np.array(times), np.array(dists)


def _run_trap_scenario(scn: Scenario, seed: int, outdir: Path) -> dict:
    regime = TrapRegime(L_w=float(scn["trap.L_w"]),
                        L_minus=float(scn["trap.L_minus"]),
                        k_hat=float(scn["trap.k_hat"]))
    g_nd = scn["trap.G_nd"]
    if g_nd is None:
        gc, _ = critical_gain(regime)
        g_nd = 1.5 * gc / int(scn["trap.n_agents"])
    g_nd = float(g_nd)
    setup = TrapSetup(regime=regime, G_nd=g_nd,
                      n_agents=int(scn["trap.n_agents"]), seed=seed,
                      domain=float(scn["trap.domain"]),
                      l_s=float(scn["trap.l_s"]), v_o=float(scn["trap.v_o"]),
                      dt=float(scn["sim.dt"]),
                      h_factor=float(scn["trap.h_factor"]))
    protocol = scn["trap.protocol"]
    if protocol == "orbit_release":
        trapped, r_nd, trajs = simulate_trap_release(
            setup, t_free=float(scn["trap.t_free"]),
            window=float(scn["trap.window"]))
    elif protocol == "nucleate":
        trapped, r_nd, trajs = simulate_trap_nucleation(
            setup, t_run=float(scn["trap.t_free"]),
            window=float(scn["trap.window"]))
    elif protocol == "free":
        times, dists = simulate_coarsening(
            n_agents=int(scn["trap.n_agents"]), G_dim=g_nd * setup.v_o,
            seed=seed, domain=setup.domain, w=regime.L_w * setup.l_s,
            v_o=setup.v_o, l_s=setup.l_s,
            k_plus=regime.k_hat * setup.k_minus, k_minus=setup.k_minus,
            t_end=float(scn["sim.duration"]), dt=float(scn["sim.dt"]))
        with open(outdir / "pairdist.csv", "w") as fh:
            fh.write("t,mean_pair_dist\n")
            for t, d in zip(times, dists):
                fh.write(f"{t:.6g},{d:.9g}\n")
        return {"protocol": "free", "G_nd": f"{g_nd:.6g}",
                "dist_initial": f"{dists[0]:.6g}",
                "dist_final": f"{dists[-1]:.6g}"}
    else:
        raise ConfigError(f"unknown trap.protocol {protocol!r}")
    with open(outdir / "trajectories.csv", "w") as fh:
        fh.write("agent,step,x,y\n")
        for a, xy in enumerate(trajs):
            for s, p in enumerate(xy):
                fh.write(f"{a},{s},{p[0]:.9g},{p[1]:.9g}\n")
    return {"protocol": protocol, "G_nd": f"{g_nd:.6g}",
            "regime": regime.regime, "trapped": int(trapped),
            "radius_nd": f"{r_nd:.6g}",
            "radius_pred_nd": f"{setup.orbit_radius_nd():.6g}"}


# ----- continuum scenario -----

def _run_continuum_scenario(scn: Scenario, outdir: Path) -> dict:
    fields, params = load_preset(scn["cont.preset"], h=float(scn["cont.h"]))
    m0 = mass_report(fields)
    times, masses = run_continuum(fields, params, t_end=float(scn["cont.t_end"]),
                                  dt=scn["cont.dt"],
                                  record_every=int(scn["cont.record_every"]))
    with open(outdir / "mass.csv", "w") as fh:
        fh.write("t,mass_agents,mass_photormone,mass_substrate\n")
        for t, m in zip(times, masses):
            fh.write(f"{t:.9g},{m[0]:.9g},{m[1]:.9g},{m[2]:.9g}\n")
    for name, arr in (("rho_a", fields.rho_a), ("c", fields.c),
                      ("rho_s", fields.rho_s)):
        np.savetxt(outdir / f"field_{name}.csv", arr.T, delimiter=",",
                   fmt="%.9g")
    m1 = mass_report(fields)
    return {"preset": scn["cont.preset"], "h": scn["cont.h"],
            "t_end": f"{times[-1]:.6g}",
            "agent_mass_drift": f"{abs(m1[0] - m0[0]) / m0[0]:.3e}",
            "substrate_mass_initial": f"{m0[2]:.9g}",
            "substrate_mass_final": f"{m1[2]:.9g}"}


# ----- sweeps -----

def _sweep_one(args):
    scn_text, overrides, seed, outdir = args
    from .config import parse_scenario_text
    scn = parse_scenario_text(scn_text).with_overrides(overrides)
    try:
        rundir = run(scn, seed, outdir)
        return overrides, seed, "ok", read_summary(rundir)
    except Exception as exc:        # recorded per cell, sweep continues
        return overrides, seed, f"error: {exc}", {}


def sweep(scn: Scenario, grid: dict, seeds, outdir, jobs: int = 1,
          plot: bool = True) -> Path:
    """Cartesian sweep over `grid` x `seeds`; aggregate CSV plus plots.

    grid maps scenario keys to value lists. Results are sorted by (cell,
    seed) before aggregation so execution order cannot leak into outputs.
    """
    if not grid:
        raise ConfigError("sweep grid must name at least one key")
    for k in grid:
        scn[k]    # raises on unknown keys before any work starts
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    keys = sorted(grid)
    cells = [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]
    tasks = []
    for ci, cell in enumerate(cells):
        for seed in seeds:
            rdir = outdir / f"cell{ci:03d}_seed{seed}"
            tasks.append((scn.to_text(), cell, int(seed), rdir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    results.sort(key=lambda r: ([r[0][k] for k in keys], r[1]))

    num_fields = ("signed_flux", "n_c_final", "covered_fraction_final",
                  "area_max_norm_final", "ellipse_L_final", "kappa_norm_final",
                  "dist_initial", "dist_final", "trapped", "radius_nd")
    rows_path = outdir / "sweep_runs.csv"
    with open(rows_path, "w") as fh:
        fh.write(",".join(keys) + ",seed,status," + ",".join(num_fields) + "\n")
        for overrides, seed, status, summ in results:
            vals = [str(overrides[k]) for k in keys]
            nums = [summ.get(f, "nan") for f in num_fields]
            fh.write(",".join(vals) + f",{seed},{status}," + ",".join(nums) + "\n")

    agg_path = outdir / "sweep_aggregate.csv"
    cells_sorted = sorted({tuple(r[0][k] for k in keys) for r in results})
    agg = {}
    with open(agg_path, "w") as fh:
        header = ",".join(keys) + ",n_ok"
        for f in num_fields:
            header += f",{f}_mean,{f}_std"
        fh.write(header + "\n")
        for cell in cells_sorted:
            sel = [r for r in results
                   if tuple(r[0][k] for k in keys) == cell and r[2] == "ok"]
            line = ",".join(str(v) for v in cell) + f",{len(sel)}"
            means = {}
            for f in num_fields:
                vals = []
                for r in sel:
                    try:
                        vals.append(float(r[3].get(f, "nan")))
                    except ValueError:
                        vals.append(float("nan"))
                vals = [v for v in vals if np.isfinite(v)]
                if vals:
                    m, s = float(np.mean(vals)), float(np.std(vals))
                    line += f",{m:.9g},{s:.9g}"
                else:
                    m = float("nan")
                    line += ",nan,nan"
                means[f] = m
            agg[cell] = means
            fh.write(line + "\n")
    if plot:
        _plot_sweep(outdir, keys, agg, num_fields)
    return outdir


def _plot_sweep(outdir: Path, keys, agg: dict, num_fields) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.backends.backend_pdf import PdfPages

    with PdfPages(outdir / "sweep_plots.pdf") as pdf:
        for f in num_fields:
            pts = [(cell[0], means[f]) for cell, means in agg.items()
                   if np.isfinite(means[f])]
            if not pts:
                continue
            fig, ax = plt.subplots(figsize=(5, 4))
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            try:
                order = np.argsort(np.asarray(xs, dtype=float))
                xs = [xs[i] for i in order]
                ys = [ys[i] for i in order]
            except (TypeError, ValueError):
                pass
            ax.plot(xs, ys, "o-")
            ax.set_xlabel(keys[0])
            ax.set_ylabel(f)
            fig.tight_layout()
            pdf.savefig(fig)
            plt.close(fig)


# ----- metrics recomputation from snapshots -----

def recompute_metrics(rundir, outpath=None) -> Path:
    """Rebuild metrics.csv from elements.csv and trace.csv in a run dir."""
    rundir = Path(rundir)
    cfgtext = (rundir / "config.txt").read_text()
    from .config import parse_scenario_text
    scn = parse_scenario_text("\n".join(
        ln for ln in cfgtext.splitlines() if not ln.startswith("seed")))
    arena = Arena(width=float(scn["arena.width"]),
                  height=float(scn["arena.height"]),
                  construction_width=float(scn["arena.construction_width"]),
                  construction_height=float(scn["arena.construction_height"]))
    kstar = kappa_star(w=float(scn["field.w"]), l_s=float(scn["agents.l_s"]),
                       v_o=float(scn["agents.v_o"]),
                       k_plus=float(scn["field.k_plus"]),
                       k_minus=float(scn["field.k_minus"]),
                       G=float(scn["agents.G"]))
    elems = np.genfromtxt(rundir / "elements.csv", delimiter=",", names=True)
    trace = np.genfromtxt(rundir / "trace.csv", delimiter=",", names=True)
    dt_rec = float(scn["sim.dt"]) * int(scn["sim.record_every"])
    rows = []
    for t in np.unique(elems["t"]):
        sel = elems[elems["t"] == t]
        free = sel["carried_by"] < 0
        centers = np.column_stack([sel["x"], sel["y"]])[free]
        radii = sel["radius"][free]
        rep = cluster_elements(centers, radii, delta=0.025,
                               region=arena.construction_rect,
                               region_area=arena.construction_area)
        inside = arena.in_construction(centers)
        ell = covariance_ellipse(centers[inside])
        w0, w1 = max(t - 30.0, 0.0), t
        win = trace[(trace["t"] > w0) & (trace["t"] <= w1)]
        kappas = []
        for aid in np.unique(win["id"]):
            tr = win[win["id"] == aid]
            if len(tr) > 2:
                xy = np.column_stack([tr["x"], tr["y"]])
                kappas.append(trajectory_curvature(xy, tr["theta"],
                                                   float(scn["agents.v_o"]),
                                                   dt_rec))
        ts = trace["t"][np.argmin(np.abs(trace["t"] - t))]
        frame = trace[trace["t"] == ts]
        apos = np.column_stack([frame["x"], frame["y"]])
        rows.append({
            "t": float(t),
            "n_c": rep.n_c,
            "covered_fraction": rep.covered_fraction,
            "area_mean_norm": rep.area_mean_norm,
            "area_max_norm": (rep.area_max / arena.construction_area
                              if rep.n_c else 0.0),
            "lambda_a": ell.semi_major ** 2 if ell is not None else None,
            "lambda_b": ell.semi_minor ** 2 if ell is not None else None,
            "ellipse_L": ell.circumference if ell is not None else None,
            "kappa_norm": float(np.mean(kappas)) / kstar if kappas else None,
            "mean_pair_dist": mean_pairwise_distance(apos),
        })
    outpath = Path(outpath) if outpath else rundir / "metrics_recomputed.csv"
    write_metrics_csv(outpath, rows)
    return outpath
