"""Performance toolkit for base-station cooperation serving cell-edge users
in millimetre-wave networks: simulation, exact analysis and a fast Gamma
approximation of the outage probability."""

from .channel import AntennaPattern, ChannelParams, NoiseModel, ula_approximation
from .config import ScenarioConfig, Study, default_scenario, load_study, parse_study
from .errors import ConfigError, DomainError, InsufficientDeployment, MmwCoopError, NumericalError, TruncationWarning
from .geometry import CoopScheme, NetworkGeometry
from .montecarlo import MetricResult, estimate_general_user, estimate_outage, estimate_rate
from .runner import compare_engines, run_study

__version__ = "0.1.0"
