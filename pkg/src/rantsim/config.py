"""Scenario configuration: dotted-key text format, defaults, strict validation.

A scenario file is plain text, one `key = value` per line, `#` comments.
Keys are dotted (`behavior.C = 0.5`); unknown keys are hard errors so typos
cannot silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    s = text.strip()
    if "," in s:
        return [parse_value(tok) for tok in s.split(",") if tok.strip() != ""]
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


_SIM_KEYS = {
    "sim.dt": 0.05,
    "sim.duration": 600.0,
    "sim.seed": 0,
    "sim.snapshot_every": 60.0,
    "sim.early_stop": 60.0,
    "sim.record_every": 1,
}

_ARENA_KEYS = {
    "arena.width": 0.67,
    "arena.height": 0.56,
    "arena.construction_width": 0.48,
    "arena.construction_height": 0.35,
}

_FIELD_KEYS = {
    "field.k_plus": 0.1,
    "field.k_minus": 0.02,
    "field.w": 0.025,          # production spot diameter
    "field.footprint": "disk",
    "field.D_c": 0.0,
    "field.project": True,     # photormone visible only in the construction area
    "field.grid_h": None,      # default l_s / 4
}

_AGENT_KEYS = {
    "agents.n": 10,
    "agents.v_o": 0.04,
    "agents.G": 0.02,
    "agents.l_s": 0.01,
    "agents.l_w": 0.03,
    "agents.body_radius": 0.015,
    "agents.control": "tanh",
}

_BEHAVIOR_KEYS = {
    "behavior.C": 1.0,
    "behavior.K": 1.0,
    "behavior.alpha": 50.0,
    "behavior.b": 0.3,
    "behavior.c_bar_frac": 0.04,
    "behavior.delta_c_frac": 0.02,
    "behavior.thresholds": "enabled",
    "behavior.carry_time_disabled": 1.5,
    "behavior.maneuver_time": 1.0,
    "behavior.carry_min_time": 4.0,
}

_SUBSTRATE_KEYS = {
    "substrate.n": 200,
    "substrate.radius": 0.011,
    "substrate.layout": "boundary",   # boundary | layers | blob | mixed | none
    "substrate.layers": 7,
}

_DETECT_KEYS = {
    "detect.range": 0.003,
    "detect.cone_deg": 15.0,
}

_SEED_FIELD_KEYS = {
    "seed_field.kind": "none",    # none | disk | gradient
    "seed_field.x": None,
    "seed_field.y": None,
    "seed_field.diameter": 0.04,
    "seed_field.value": None,     # default: field saturation
    "seed_field.slope": None,
}

_WORLD_MODES_COMMON = {**_SIM_KEYS, **_ARENA_KEYS, **_FIELD_KEYS, **_AGENT_KEYS,
                       **_BEHAVIOR_KEYS, **_SUBSTRATE_KEYS, **_DETECT_KEYS,
                       **_SEED_FIELD_KEYS}

_TRAP_KEYS = {
    **_SIM_KEYS,
    "trap.L_w": 3.0,
    "trap.L_minus": 8.0 / 3.0,
    "trap.k_hat": 1.0,
    "trap.G_nd": None,           # default 1.5x predicted critical gain
    "trap.protocol": "orbit_release",   # orbit_release | nucleate
    "trap.n_agents": 1,
    "trap.domain": 0.2,
    "trap.l_s": 0.01,
    "trap.v_o": 0.04,
    "trap.h_factor": 4,          # grid h = l_s / h_factor
    "trap.t_free": 90.0,
    "trap.window": 30.0,
}

_CG_KEYS = {
    **_SIM_KEYS,
    "cg.lambdas": [1.0, 1.7782794100389228, 3.1622776601683795,
                   5.623413251903491, 10.0],
    "cg.G": 0.3,
    "cg.v_o": 0.04,
    "cg.l_s": 0.01,
    "cg.l_w": 0.03,
    "cg.periods": 20.0,
    "cg.steps_per_period": 1000,
    "cg.r0_scale": 1.02,
}

_CONTINUUM_KEYS = {
    **_SIM_KEYS,
    "cont.preset": "construction",
    "cont.h": 0.05,
    "cont.t_end": 2.0,
    "cont.dt": None,             # None -> adaptive CFL
    "cont.record_every": 20,
}

SCENARIO_KEYS = {
    "construction": dict(_WORLD_MODES_COMMON),
    "deconstruction": {**_WORLD_MODES_COMMON,
                       "behavior.K": -1.0,
                       "behavior.carry_min_time": 10.0,
                       "agents.G": 0.01,
                       "substrate.n": 60,
                       "substrate.layout": "blob",
                       "seed_field.kind": "disk",
                       "seed_field.diameter": 0.16},
    "robustness_2x2": {**_WORLD_MODES_COMMON, "case": "C"},
    "single_trap": dict(_TRAP_KEYS),
    "multi_trap_phase": {**_TRAP_KEYS, "trap.protocol": "nucleate",
                         "trap.n_agents": 2},
    "constant_gradient": dict(_CG_KEYS),
    "continuum": dict(_CONTINUUM_KEYS),
}

MODES = tuple(sorted(SCENARIO_KEYS))


@dataclass
class Scenario:
    mode: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario mode {self.mode!r}; "
                              f"choose from {', '.join(MODES)}")
        known = SCENARIO_KEYS[self.mode]
        full = dict(known)
        for k, v in self.params.items():
            if k not in known:
                raise ConfigError(f"unknown key {k!r} for mode {self.mode!r}")
            full[k] = v
        self.params = full

    def __getitem__(self, key: str):
        if key not in self.params:
            raise ConfigError(f"unknown key {key!r} for mode {self.mode!r}")
        return self.params[key]

    def override(self, key: str, value) -> None:
        if key == "mode":
            raise ConfigError("mode cannot be overridden after creation")
        if key not in SCENARIO_KEYS[self.mode]:
            raise ConfigError(f"unknown key {key!r} for mode {self.mode!r}")
        self.params[key] = value

    def with_overrides(self, mapping: dict) -> "Scenario":
        out = Scenario(self.mode, dict(self.params))
        for k, v in mapping.items():
            out.override(k, v)
        return out

    def to_text(self) -> str:
        lines = [f"mode = {self.mode}"]
        for k in sorted(self.params):
            lines.append(f"{k} = {format_value(self.params[k])}")
        return "\n".join(lines) + "\n"


def parse_scenario_text(text: str) -> Scenario:
    raw = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        key, val = body.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        raw[key] = parse_value(val)
    mode = raw.pop("mode", None)
    if mode is None:
        raise ConfigError("scenario file must set 'mode'")
    return Scenario(mode=mode, params=raw)


def load_scenario(path) -> Scenario:
    with open(str(path)) as fh:
        return parse_scenario_text(fh.read())


def make_scenario(mode: str, **dotted) -> Scenario:
    """Scenario from keyword overrides with _ standing in for the dot."""
    params = {k.replace("__", "."): v for k, v in dotted.items()}
    return Scenario(mode=mode, params=params)
