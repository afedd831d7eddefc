"""Simulation and surface-feedback state estimation of subsurface tissue
temperature under a moving electrosurgical heat source.
"""

from .estimation import (
    DEPTH_CORRECTION,
    DiffusivityEstimate,
    FrameHistory,
    estimate_diffusivity,
    nr_surface_laplacian,
    nr_time_derivative,
    rtc,
)
from .config import ScenarioConfig, load_bundled, load_config
from .disturbance import DisturbanceSpec, make_disturbance
from .errors import (
    ConfigurationError,
    ConstructionError,
    SchedulingError,
    SolverError,
    ThermobsError,
)
from .grid import (
    BoundaryCondition,
    FaceBC,
    Field3,
    Grid3,
    SensorSet,
    SurfaceFrame,
    inject_pointwise,
    laplacian,
    restrict_to_surface,
)
from .observer import GainSchedule, ObserverState, gain_lower_bound, step_observer, update_abar
from .solver import (
    MaterialProps,
    PlantState,
    SolverParams,
    ThermalModel,
    run_plant,
    step_heat,
    step_plant,
)
from .source import ProbeSchedule, ProbeState, SourceSpec, build_source, probe_at, shift_source

__version__ = "0.1.0"
