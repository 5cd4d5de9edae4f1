"""Stored-light retrieval in a cold atomic gas driven by a standing-wave control field.

The package integrates the truncated coherence hierarchy in time, evaluates the
frequency-domain dispersion relation, and provides the adiabatic-limit formulas
used to check both.
"""

from .analytic import c0_exact, c0_slowlight, traveling_wave, velocity_table
from .core import (
    DEFAULT_PARAMS,
    BECEstimate,
    ColdLinear,
    ConfigError,
    CustomTable,
    FieldState,
    Grid,
    LaserCooledEstimate,
    PhysicalParams,
    SimulationConfig,
    ZeroDecay,
    make_config,
)
from .dispersion import dispersion_k, effective_decays, scan_dispersion, truncated_matrix_oracle
from .hierarchy import (
    Behavior,
    classify_behavior,
    converge_in_order,
    estimate_group_velocity,
    simulate,
)

__version__ = "0.1.0"
