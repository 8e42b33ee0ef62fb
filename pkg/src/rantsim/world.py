"""Arena world: agents, substrate elements, field, and the tick loop.

Tick order (one dt): sense -> controller -> kinematics/actions -> wall
response -> field update with one production spot per agent. Agents are
always processed in id order, and a contested fetch goes to the lower id, so
a run is a pure function of (config, seed).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentState, KinematicParams, gradient_turn_rate, step_kinematics
from .controller import BehaviorParams, behavior_tick
from .core import RngStream, SimConfig, unit_heading, wiener_increment, wrap_angle
from .photormone import PhotormoneGrid, SourceFootprint, make_grid, sensor_pair_read, step_field


@dataclass
class SubstrateElement:
    pos: np.ndarray
    radius: float = 0.011     # 22 mm diameter pucks
    carried_by: int = -1      # agent id, -1 when free

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        if self.radius <= 0:
            raise ValueError("element radius must be > 0")


@dataclass
class Arena:
    width: float = 0.67
    height: float = 0.56
    construction_width: float = 0.48
    construction_height: float = 0.35

    def __post_init__(self):
        if self.construction_width > self.width or self.construction_height > self.height:
            raise ValueError("construction area cannot exceed the arena")

    @property
    def construction_rect(self):
        """(x0, y0, x1, y1) of the centered construction area."""
        x0 = 0.5 * (self.width - self.construction_width)
        y0 = 0.5 * (self.height - self.construction_height)
        return (x0, y0, x0 + self.construction_width, y0 + self.construction_height)

    def in_construction(self, pos) -> np.ndarray:
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        x0, y0, x1, y1 = self.construction_rect
        return ((pos[:, 0] >= x0) & (pos[:, 0] <= x1) &
                (pos[:, 1] >= y0) & (pos[:, 1] <= y1))

    @property
    def construction_area(self) -> float:
        return self.construction_width * self.construction_height


@dataclass
class WorldParams:
    kin: KinematicParams = field(default_factory=KinematicParams)
    beh: BehaviorParams = field(default_factory=BehaviorParams)
    control: str = "tanh"         # "tanh" (full controller) | "linear" (raw gradient law)
    w: float = 0.025              # production spot diameter, m
    footprint: str = "disk"       # rasterized profile
    body_radius: float = 0.015    # agent body half-width, m
    detect_range: float = 0.003   # IR range from the leading edge, m
    cone_half_angle: float = np.deg2rad(15.0)
    project_to_construction: bool = False  # photormone visible only inside the area

    def __post_init__(self):
        if self.control not in ("tanh", "linear"):
            raise ValueError(f"unknown control mode {self.control!r}")
        if self.w <= 0:
            raise ValueError("production width must be > 0")

    @property
    def footprint_radius(self) -> float:
        return 0.5 * self.w

    @property
    def carry_offset(self) -> float:
        """Element center held this far ahead of the agent center."""
        return self.body_radius


@dataclass
class WorldState:
    cfg: SimConfig
    arena: Arena
    params: WorldParams
    grid: PhotormoneGrid
    agents: list
    elem_pos: np.ndarray          # (N, 2)
    elem_radius: np.ndarray       # (N,)
    elem_carrier: np.ndarray      # (N,) agent id or -1
    t: float = 0.0
    _streams: list = field(default_factory=list)
    _W: np.ndarray = field(default=None)
    _mask: np.ndarray = field(default=None)
    _busy: np.ndarray = field(default=None)
    _busy_rate: np.ndarray = field(default=None)
    _carry_t: np.ndarray = field(default=None)
    last_actions: list = field(default_factory=list)

    def __post_init__(self):
        self.set_agents(self.agents, reset_noise=self._W is None)
        if self.params.project_to_construction:
            self._mask = _construction_mask(self.grid, self.arena)

    def set_agents(self, agents, reset_noise: bool = True) -> None:
        """Replace the roster; per-agent streams follow the ids, not the count."""
        self.agents = list(agents)
        root = RngStream(self.cfg.seed)
        self._streams = [root.substream(1 + a.id) for a in self.agents]
        self._busy = np.zeros(len(self.agents))
        self._busy_rate = np.zeros(len(self.agents))
        self._carry_t = np.zeros(len(self.agents))
        if reset_noise:
            self._W = np.zeros(len(self.agents))

    @property
    def n_elements(self) -> int:
        return len(self.elem_pos)

    def elements(self):
        return [SubstrateElement(pos=self.elem_pos[i].copy(),
                                 radius=float(self.elem_radius[i]),
                                 carried_by=int(self.elem_carrier[i]))
                for i in range(self.n_elements)]

    def free_mask(self) -> np.ndarray:
        return self.elem_carrier < 0

    def state_digest(self) -> str:
        """Hash of the full dynamic state, for determinism checks."""
        hsh = hashlib.sha256()
        for a in self.agents:
            hsh.update(np.array([a.r[0], a.r[1], a.theta, a.d, a.carrying]).tobytes())
        hsh.update(self.elem_pos.tobytes())
        hsh.update(self.elem_carrier.tobytes())
        hsh.update(self.grid.values.tobytes())
        hsh.update(self._W.tobytes())
        hsh.update(self._busy.tobytes())
        hsh.update(self._carry_t.tobytes())
        hsh.update(np.array([self.t]).tobytes())
        return hsh.hexdigest()


def _construction_mask(grid: PhotormoneGrid, arena: Arena) -> np.ndarray:
    x0, y0, x1, y1 = arena.construction_rect
    xs = (np.arange(grid.nx) + 0.5) * grid.h
    ys = (np.arange(grid.ny) + 0.5) * grid.h
    return ((xs[:, None] >= x0) & (xs[:, None] <= x1) &
            (ys[None, :] >= y0) & (ys[None, :] <= y1)).astype(float)


def make_world(cfg: SimConfig, params: WorldParams, arena: Arena = None,
               agents=None, elements=None, grid_h: float = None,
               k_plus: float = 0.1, k_minus: float = 0.02,
               D_c: float = 0.0) -> WorldState:
    if arena is None:
        # scoring region defaults to the whole domain (trap/coarsening worlds)
        arena = Arena(width=cfg.width, height=cfg.height,
                      construction_width=cfg.width,
                      construction_height=cfg.height)
    h = grid_h if grid_h is not None else params.kin.l_s / 4.0
    boundary = "periodic" if cfg.boundary == "periodic" else "neumann"
    grid = make_grid(cfg.width, cfg.height, h,
                     k_plus=k_plus, k_minus=k_minus, D_c=D_c, boundary=boundary)
    agents = agents or []
    elements = elements or []
    n = len(elements)
    elem_pos = np.array([e.pos for e in elements], dtype=float).reshape(n, 2)
    elem_radius = np.array([e.radius for e in elements], dtype=float)
    elem_carrier = np.array([e.carried_by for e in elements], dtype=int)
    return WorldState(cfg=cfg, arena=arena, params=params, grid=grid,
                      agents=list(agents), elem_pos=elem_pos,
                      elem_radius=elem_radius, elem_carrier=elem_carrier)


# ----- sensing -----

def ir_detect(s: AgentState, world: WorldState):
    """Proximity sensor: (obstacle_detected, element_index, wall_detected).

    Looks for the nearest free element whose surface lies within detect_range
    of the leading edge, inside a forward cone around the heading. A carried
    element always reads as detected (the sensor stares at the attached puck).
    Walls are flagged when the leading edge comes within range of the arena
    boundary (walls mode only).
    """
    p = world.params
    if s.carrying >= 0:
        return True, int(s.carrying), False
    tip = s.r + p.body_radius * unit_heading(s.theta)
    best = -1
    best_gap = np.inf
    free = world.free_mask()
    if free.any():
        rel = world.elem_pos[free] - tip
        dist = np.hypot(rel[:, 0], rel[:, 1])
        gap = dist - world.elem_radius[free]
        ang = np.abs(wrap_angle_array(np.arctan2(rel[:, 1], rel[:, 0]) - s.theta))
        ok = (gap <= p.detect_range) & (ang <= p.cone_half_angle)
        if ok.any():
            idx_free = np.flatnonzero(free)
            cand = idx_free[ok]
            gaps = gap[ok]
            j = int(np.argmin(gaps))
            best, best_gap = int(cand[j]), float(gaps[j])
    wall = False
    if world.cfg.boundary == "walls":
        x, y = tip
        wall = (x < p.detect_range or y < p.detect_range or
                x > world.cfg.width - p.detect_range or
                y > world.cfg.height - p.detect_range)
    return (best >= 0 or wall), best, wall


def wrap_angle_array(a: np.ndarray) -> np.ndarray:
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


# ----- attach / detach -----

def attach(world: WorldState, agent: AgentState, elem_idx: int) -> bool:
    """Bind a free element to the agent; flips d to -1. False if contested."""
    if elem_idx < 0 or elem_idx >= world.n_elements:
        return False
    if world.elem_carrier[elem_idx] >= 0 or agent.carrying >= 0:
        return False
    world.elem_carrier[elem_idx] = agent.id
    agent.carrying = elem_idx
    agent.d = -1
    _place_carried(world, agent)
    return True


def detach(world: WorldState, agent: AgentState, nudge: bool = True) -> int:
    """Free the carried element at its current spot; returns its index."""
    idx = agent.carrying
    if idx < 0:
        agent.d = 1
        return -1
    world.elem_carrier[idx] = -1
    agent.carrying = -1
    agent.d = 1
    if nudge:
        _nudge_released(world, idx)
    _clamp_element(world, idx)
    return idx


def _place_carried(world: WorldState, agent: AgentState) -> None:
    idx = agent.carrying
    if idx < 0:
        return
    offset = world.params.carry_offset + world.elem_radius[idx]
    world.elem_pos[idx] = agent.r + offset * unit_heading(agent.theta)
    _clamp_element(world, idx)


def _nudge_released(world: WorldState, idx: int, max_iter: int = 8) -> None:
    """Push a just-released element radially out of any heavy overlap.

    Overlaps above 10% of the element radius are resolved to contact along the
    line of centers, a few passes at most.
    """
    r_i = world.elem_radius[idx]
    for _ in range(max_iter):
        free = world.free_mask()
        free[idx] = False
        if not free.any():
            return
        rel = world.elem_pos[idx] - world.elem_pos[free]
        dist = np.hypot(rel[:, 0], rel[:, 1])
        touch = r_i + world.elem_radius[free]
        overlap = touch - dist
        j = int(np.argmax(overlap))
        if overlap[j] <= 0.1 * r_i:
            return
        if dist[j] == 0.0:
            direction = np.array([1.0, 0.0])
        else:
            direction = rel[j] / dist[j]
        world.elem_pos[idx] = world.elem_pos[free][j] + direction * touch[j]


def _clamp_element(world: WorldState, idx: int) -> None:
    if world.cfg.boundary != "walls":
        world.elem_pos[idx][0] %= world.cfg.width
        world.elem_pos[idx][1] %= world.cfg.height
        return
    r = world.elem_radius[idx]
    world.elem_pos[idx][0] = np.clip(world.elem_pos[idx][0], r, world.cfg.width - r)
    world.elem_pos[idx][1] = np.clip(world.elem_pos[idx][1], r, world.cfg.height - r)


def _reflect_agent(world: WorldState, agent: AgentState) -> None:
    """Specular wall response: mirror the offending coordinate and heading."""
    br = world.params.body_radius
    x, y = agent.r
    th = agent.theta
    if x < br:
        x = 2.0 * br - x
        th = np.pi - th
    elif x > world.cfg.width - br:
        x = 2.0 * (world.cfg.width - br) - x
        th = np.pi - th
    if y < br:
        y = 2.0 * br - y
        th = -th
    elif y > world.cfg.height - br:
        y = 2.0 * (world.cfg.height - br) - y
        th = -th
    agent.r = np.array([x, y])
    agent.theta = wrap_angle(th)


# ----- main loop -----

def _begin_maneuver(world: WorldState, i: int, agent, rotate_by: float,
                    dt: float) -> None:
    """Start an in-place rotation (avoid / post-release turn-away).

    The robot stops driving and turns through rotate_by over maneuver_time
    seconds, depositing photormone the whole while; this stationary dwell is
    what lets repeated obstacle encounters deepen the local field. A
    maneuver_time below one tick degenerates to an instantaneous turn.
    """
    mt = world.params.beh.maneuver_time
    if mt < dt:
        agent.theta = wrap_angle(agent.theta + rotate_by)
        return
    world._busy[i] = mt
    world._busy_rate[i] = rotate_by / mt


def step_world(world: WorldState, dt: float) -> None:
    p = world.params
    kin = p.kin
    actions = []

    # 1-2: sense and decide for every agent against the pre-step state;
    # agents mid-maneuver hold position and do not decide this tick
    decisions = []
    for i, a in enumerate(world.agents):
        world._W[i] += wiener_increment(world._streams[i], dt)
        if world._busy[i] > 0.0:
            decisions.append(None)
            continue
        c_l, c_r = sensor_pair_read(world.grid, a.r, a.theta, kin.l_s)
        detected, elem_idx, wall = ir_detect(a, world)
        if p.control == "linear":
            omega = gradient_turn_rate(c_l, c_r, kin)
            decisions.append((omega, None, -1))
        else:
            ctrl = behavior_tick(c_l, c_r, detected, a, p.beh,
                                 world._streams[i], world._W[i], dt,
                                 carry_time=world._carry_t[i])
            decisions.append((kin.G * ctrl.omega, ctrl, elem_idx))

    # 3: act and move, id order; fetch contention resolved to the lower id
    for i, a in enumerate(world.agents):
        if decisions[i] is None:
            a.theta = wrap_angle(a.theta + world._busy_rate[i] * dt)
            world._busy[i] = max(0.0, world._busy[i] - dt)
            actions.append("hold")
            _place_carried(world, a)
            continue
        omega, ctrl, elem_idx = decisions[i]
        in_place = False
        action = "none"
        if ctrl is not None:
            action = ctrl.action
            if action == "fetch":
                if elem_idx >= 0 and not attach(world, a, elem_idx):
                    action = "none"   # lost the race or wall-only detection
                elif elem_idx < 0:
                    action = "none"
                else:
                    world._carry_t[i] = 0.0
            elif action == "avoid":
                _begin_maneuver(world, i, a, ctrl.rotate_by, dt)
                in_place = True
            elif action == "release":
                detach(world, a)
                _begin_maneuver(world, i, a, ctrl.rotate_by, dt)
                in_place = True
            elif action == "reset_forward":
                detach(world, a, nudge=False)
        actions.append(action)
        if not in_place:
            moved = step_kinematics(a, omega, kin, world.cfg, dt)
            a.r, a.theta = moved.r, moved.theta
        if world.cfg.boundary == "walls":
            _reflect_agent(world, a)
        _place_carried(world, a)

    # 4: advance carry clocks (holding during the attach tick counts as zero)
    for i, a in enumerate(world.agents):
        world._carry_t[i] = world._carry_t[i] + dt if a.carrying >= 0 else 0.0

    # 5: field update, one spot per agent at its new position
    sources = [SourceFootprint(center=a.r, radius=p.footprint_radius,
                               profile=p.footprint) for a in world.agents]
    step_field(world.grid, sources, dt)
    if world._mask is not None:
        world.grid.values *= world._mask
    world.t += dt
    world.last_actions = actions


def run_world(world: WorldState, duration: float, dt: float = None,
              record_every: int = 1, early_stop: float = 0.0):
    """Advance the world, recording agent poses each `record_every` ticks.

    early_stop > 0 ends the run once no element inside the construction area
    has moved for that many seconds. Returns (times, poses, trace_actions)
    where poses has shape (n_rec, n_agents, 5): x, y, theta, d, carrying.
    """
    dt = dt if dt is not None else world.cfg.dt
    n = int(round(duration / dt))
    times = []
    poses = []
    trace_actions = []
    quiet = 0.0
    prev = _construction_signature(world)
    for step in range(n):
        step_world(world, dt)
        if step % record_every == 0:
            times.append(world.t)
            poses.append([[a.r[0], a.r[1], a.theta, a.d, a.carrying]
                          for a in world.agents])
            trace_actions.append(list(world.last_actions))
        if early_stop > 0.0:
            sig = _construction_signature(world)
            quiet = quiet + dt if sig == prev else 0.0
            prev = sig
            if quiet >= early_stop:
                break
    return np.array(times), np.array(poses), trace_actions


def _construction_signature(world: WorldState) -> bytes:
    if world.n_elements == 0:
        return b""
    inside = world.arena.in_construction(world.elem_pos)
    return world.elem_pos[inside].tobytes() + inside.tobytes()


# ----- substrate layouts -----

def _ring_positions(arena: Arena, off: float, n: int) -> list:
    w, h = arena.width - 2 * off, arena.height - 2 * off
    perim = 2.0 * (w + h)
    pts = []
    for i in range(n):
        s = perim * i / n
        if s < w:
            x, y = off + s, off
        elif s < w + h:
            x, y = arena.width - off, off + (s - w)
        elif s < 2 * w + h:
            x, y = arena.width - off - (s - w - h), arena.height - off
        else:
            x, y = off, arena.height - off - (s - 2 * w - h)
        pts.append(np.array([x, y]))
    return pts


def layout_boundary(n: int, arena: Arena, radius: float = 0.011,
                    wall_gap: float = 0.005, spacing_gap: float = 0.0015) -> list:
    """n elements in non-overlapping rings along the arena perimeter.

    Rings are filled outside-in, each inset one diameter from the previous,
    and must stay clear of the construction area; too many elements for the
    available margin is an error rather than a silent overlap.
    """
    margin = min(0.5 * (arena.width - arena.construction_width),
                 0.5 * (arena.height - arena.construction_height))
    pitch = 2.0 * radius + spacing_gap
    out = []
    k = 0
    while len(out) < n:
        off = wall_gap + radius + k * (2.0 * radius + 0.001)
        if off + radius > margin:
            raise ValueError(f"boundary layout cannot hold {n} elements "
                             f"outside the construction area")
        w, h = arena.width - 2 * off, arena.height - 2 * off
        cap = int(2.0 * (w + h) / pitch)
        take = min(n - len(out), cap)
        out.extend(SubstrateElement(pos=p, radius=radius)
                   for p in _ring_positions(arena, off, take))
        k += 1
    return out


def layout_blob(n: int, arena: Arena, radius: float = 0.011,
                center=None, spacing_scale: float = 1.05) -> list:
    """n elements hex-packed into a disk, by default at the arena center."""
    if center is None:
        center = np.array([0.5 * arena.width, 0.5 * arena.height])
    dx = 2.0 * radius * spacing_scale
    dy = np.sqrt(3.0) * radius * spacing_scale
    span = int(np.ceil(np.sqrt(n))) + 2
    pts = []
    for j in range(-span, span + 1):
        for i in range(-span, span + 1):
            p = center + np.array([dx * (i + 0.5 * (j % 2)), dy * j])
            pts.append(p)
    pts.sort(key=lambda p: (np.hypot(p[0] - center[0], p[1] - center[1]),
                            np.arctan2(p[1] - center[1], p[0] - center[0])))
    return [SubstrateElement(pos=p, radius=radius) for p in pts[:n]]


def layout_mixed(n: int, arena: Arena, radius: float = 0.011) -> list:
    """Half the elements in a central blob, the rest along the boundary."""
    n_blob = n // 2
    return (layout_blob(n_blob, arena, radius) +
            layout_boundary(n - n_blob, arena, radius))


def layout_layers(n_layers: int, arena: Arena, radius: float = 0.011,
                  max_elements: int = None) -> list:
    """Rows of touching elements stacked along the bottom long edge."""
    per_row = int(arena.width // (2 * radius))
    x0 = 0.5 * (arena.width - per_row * 2 * radius) + radius
    out = []
    for j in range(n_layers):
        y = radius + j * 2 * radius
        for i in range(per_row):
            if max_elements is not None and len(out) >= max_elements:
                return out
            out.append(SubstrateElement(pos=np.array([x0 + i * 2 * radius, y]),
                                        radius=radius))
    return out


def seed_photormone_disk(world: WorldState, center, diameter: float,
                         value: float) -> None:
    """Paint an initial photormone spot (projected seed); decays naturally."""
    g = world.grid
    xs = (np.arange(g.nx) + 0.5) * g.h - center[0]
    ys = (np.arange(g.ny) + 0.5) * g.h - center[1]
    d2 = xs[:, None] ** 2 + ys[None, :] ** 2
    g.values[d2 <= (0.5 * diameter) ** 2] = value


def seed_linear_gradient(world: WorldState, slope: float, axis: int = 1) -> None:
    """Initial linear field a*y (or a*x); used to kick agents into rotation."""
    g = world.grid
    coord = (np.arange(g.nx if axis == 0 else g.ny) + 0.5) * g.h
    ramp = slope * coord
    if axis == 0:
        g.values += ramp[:, None]
    else:
        g.values += ramp[None, :]
