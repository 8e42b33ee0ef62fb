"""rantsim: stigmergic collective construction by phototactic robot ants.

Discrete agents steer along a self-deposited, decaying light field
(photormone), pick up and drop substrate elements, and nucleate structures
through a trapping instability. The package also carries the matching
closed-form trap theory, a continuum three-field model, and the metrics and
scenario harness used to score runs.
"""

from .core import RngStream, SimConfig
from .agent import AgentState, KinematicParams
from .controller import BehaviorParams
from .photormone import PhotormoneGrid, SourceFootprint, make_grid
from .world import Arena, SubstrateElement, WorldParams, WorldState, make_world
from .trap import TrapRegime, TrapPrediction, critical_gain, predict
from .continuum import ContinuumParams, load_preset, run_continuum
from .config import ConfigError, Scenario, load_scenario, make_scenario

__version__ = "0.1.0"

__all__ = [
    "AgentState", "Arena", "BehaviorParams", "ConfigError", "ContinuumParams",
    "KinematicParams", "PhotormoneGrid", "RngStream", "Scenario", "SimConfig",
    "SourceFootprint", "SubstrateElement", "TrapPrediction", "TrapRegime",
    "WorldParams", "WorldState", "critical_gain", "load_preset",
    "load_scenario", "make_grid", "make_scenario", "make_world", "predict",
    "run_continuum", "__version__",
]
