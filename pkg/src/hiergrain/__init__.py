"""Label-bounded CODA opinion dynamics: simulator, metrics, regime analysis and sweeps."""

__version__ = "0.1.0"

from .config import ConfigError, SimulationConfig, load_config, validate_config  # noqa: E402
from .population import AgentState, Population, init_population  # noqa: E402
from .rng import Stream, derive_replicate_seed  # noqa: E402
from .engine import StepReport, step  # noqa: E402
from .simulate import RunResult, run_simulation  # noqa: E402
from .analysis import Regime, RegimeReport, Thresholds, classify_regime  # noqa: E402

__all__ = [
    "AgentState", "ConfigError", "Population", "Regime", "RegimeReport", "RunResult",
    "SimulationConfig", "StepReport", "Stream", "Thresholds", "classify_regime",
    "derive_replicate_seed", "init_population", "load_config", "run_simulation", "step",
    "validate_config",
]
