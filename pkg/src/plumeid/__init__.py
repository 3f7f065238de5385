"""Bayesian identification of groundwater contaminant sources.

Reconstructs an unknown two-plume initial condition from sparse, noisy well
observations by DRAM MCMC, driven either by a finite-volume transport model
or by a trained convolutional surrogate of it.
"""

__version__ = "0.1.0"

from .domain import (
    GridSpec,
    ScalarField,
    SourceParams,
    TransportParams,
    TRUTH_SOURCE,
    WellNetwork,
    default_well_network,
    node_at,
    plume_mass,
    read_field,
    render_initial_condition,
    write_field,
)
from .flow import FlowBoundaryConditions, VelocityField, compute_velocity, solve_head
from .geostat import SpectralCovarianceSpec, conductivity_from_log, generate_log_conductivity
from .transport import (
    ObservationSet,
    TransportSolution,
    add_noise,
    default_observation_times,
    dispersion_tensor,
    observe,
    simulate_transport,
)

__all__ = [name for name in dir() if not name.startswith("_")]
