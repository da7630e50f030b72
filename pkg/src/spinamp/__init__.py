"""Spin-amplification cellular automaton toolkit.

Builds the two-species pyramid lattice, runs the field-conditioned flip
algorithm under ideal and noisy conditions, and computes dipolar-coupling
stick spectra for cubic and rhombohedral crystal geometries.
"""

__version__ = "0.1.0"

from .automaton import (
    DEFAULT_FIELDS,
    EXTENDED_FIELDS,
    Engine,
    RunTrace,
    SpinState,
    apply_pulse,
    neighbor_field,
    predicted_flip_count,
    run_ideal,
    run_phase,
    seed_apex,
)
from .errors import CapacityError, SizingError
from .geometry import CouplingTable, LatticeGeometry, coupling_table, dipolar_coupling
from .lattice import (
    PyramidLattice,
    Site,
    Species,
    build_pyramid,
    classify_site,
    layer_size,
    neighbors_of,
    site_count,
)
from .noise import (
    ExperimentConfig,
    ExperimentResult,
    NoiseModel,
    diffuse,
    eps0_from_polarization,
    noisy_pulse,
    randomize_initial,
    run_experiment,
    run_trial,
)
from .spectrum import (
    SpectrumConfig,
    StickSpectrum,
    addressability_metric,
    compare_models,
    stick_spectrum,
)
