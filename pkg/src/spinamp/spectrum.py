"""Secular frequency-shift stick spectra for a probed spin.

Each partner configuration {s_j} of the probe's coupling table shifts the
probe's resonance by sum_j 2 d_j s_j; enumerating (or sampling) the partner
states yields a stick spectrum whose weights are the configuration
probabilities.  Homonuclear suppression removes all same-species couplings.
Only the diagonal 2 sigma_z sigma_z term sets stick positions; flip-flop
effects appear solely through the Gaussian broadening width.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import CapacityError
from .geometry import CouplingTable, LatticeGeometry, coupling_table, ideal_nn_table
from .lattice import PyramidLattice, Site

MODELS = ("ideal-nn", "full-nn", "full-dipolar")


@dataclass(frozen=True)
class SpectrumConfig:
    model: str = "ideal-nn"
    suppress_homonuclear: bool = False
    cutoff: float = 2.5  # in lattice constants, full-dipolar mode
    d0: float = 1000.0  # flat NN coupling of the idealized model, Hz
    p_up: float = 0.5  # partner-state up probability (0.5 = unpolarized)
    exhaustive_threshold: int = 18
    allow_monte_carlo: bool = True
    mc_samples: int = 200_000
    mc_seed: int = 0
    broadening_hz: float = 50.0
    grid_points: int = 4096
    min_coupling_hz: float = 1e-6

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError("p_up outside [0, 1]")
        if self.broadening_hz <= 0:
            raise ValueError("broadening width must be positive")


@dataclass
class StickSpectrum:
    """(frequency, weight) sticks plus an optional broadened curve."""

    freqs: np.ndarray
    weights: np.ndarray
    grid: Optional[np.ndarray] = None
    curve: Optional[np.ndarray] = None

    def broadened(self, grid: np.ndarray, sigma: float) -> "StickSpectrum":
        curve = np.zeros_like(grid)
        for f, w in zip(self.freqs, self.weights):
            curve += w * np.exp(-((grid - f) ** 2) / (2 * sigma**2))
        area = np.trapezoid(curve, grid)
        if area > 0:
            curve /= area
        return StickSpectrum(self.freqs, self.weights, grid=grid, curve=curve)


def model_table(
    probe: Site,
    geometry: LatticeGeometry,
    config: SpectrumConfig,
    *,
    lattice: PyramidLattice | None = None,
) -> CouplingTable:
    """Coupling table for the configured model, pyramid-truncated when a
    lattice is supplied."""
    if config.model == "ideal-nn":
        if lattice is None:
            raise ValueError("ideal-nn model needs a pyramid for the probe's neighborhood")
        table = ideal_nn_table(probe, lattice, d0=config.d0)
    else:
        cutoff = config.cutoff * geometry.a
        table = coupling_table(
            geometry,
            probe,
            lattice=lattice,
            cutoff=cutoff,
            min_coupling_hz=config.min_coupling_hz,
        )
        if config.model == "full-nn":
            keep = table.nn
            table = CouplingTable(
                probe=table.probe,
                offsets=table.offsets[keep],
                d=table.d[keep],
                k=table.k[keep],
                nn=table.nn[keep],
                partner_ids=None if table.partner_ids is None else table.partner_ids[keep],
            )
    if config.suppress_homonuclear:
        table = table.suppressed()
    return table


def _enumerate_configs(d, nn, config: SpectrumConfig):
    """Per-configuration (freq, weight, nn_field) arrays, exhaustive or sampled."""
    m = len(d)
    p = config.p_up
    if m == 0:
        return np.zeros(1), np.ones(1), np.zeros(1)
    if m <= config.exhaustive_threshold:
        codes = np.arange(1 << m, dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(m)) & 1).astype(np.int8)
    elif config.allow_monte_carlo:
        rng = np.random.Generator(np.random.Philox(config.mc_seed))
        bits = (rng.random((config.mc_samples, m)) < p).astype(np.int8)
    else:
        raise CapacityError(
            f"{m} partners exceed the exhaustive threshold "
            f"({config.exhaustive_threshold}) and Monte Carlo is disabled"
        )
    signs = 2 * bits - 1
    freqs = signs @ (2.0 * d)
    if m <= config.exhaustive_threshold:
        ups = bits.sum(axis=1)
        weights = p**ups * (1 - p) ** (m - ups)
    else:
        weights = np.full(len(bits), 1.0 / len(bits))
    nn_field = signs[:, nn].sum(axis=1) if nn.any() else np.zeros(len(bits))
    return freqs, weights, nn_field


def merge_sticks(freqs, weights, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge equal frequencies (within tol) into single sticks; drop zero weights."""
    keep = weights > 0
    freqs, weights = freqs[keep], weights[keep]
    if len(freqs) == 0:
        return np.zeros(1), np.ones(1)
    order = np.argsort(freqs)
    freqs, weights = freqs[order], weights[order]
    group = np.concatenate(([0], np.cumsum(np.diff(freqs) > tol)))
    n_groups = group[-1] + 1
    w = np.bincount(group, weights=weights, minlength=n_groups)
    f = np.bincount(group, weights=freqs * weights, minlength=n_groups) / w
    return f, w


def _grid_for(max_freq: float, config: SpectrumConfig) -> np.ndarray:
    span = 1.5 * max_freq
    if span <= 0:
        span = max(6 * config.broadening_hz, 1.0)
    return np.linspace(-span, span, config.grid_points)


def spectrum_from_table(
    table: CouplingTable,
    config: SpectrumConfig,
    *,
    grid: np.ndarray | None = None,
) -> StickSpectrum:
    d = table.d
    freqs, weights, _ = _enumerate_configs(d, table.nn, config)
    tol = 1e-6 * np.max(np.abs(d)) if len(d) else 1e-12
    f, w = merge_sticks(freqs, weights, tol)
    if grid is None:
        grid = _grid_for(float(np.max(np.abs(f))), config)
    return StickSpectrum(f, w).broadened(grid, config.broadening_hz)


def stick_spectrum(
    probe: Site,
    geometry: LatticeGeometry,
    config: SpectrumConfig,
    *,
    lattice: PyramidLattice | None = None,
    grid: np.ndarray | None = None,
) -> StickSpectrum:
    """Full pipeline: coupling table -> configuration enumeration -> merged
    sticks -> broadened curve."""
    table = model_table(probe, geometry, config, lattice=lattice)
    return spectrum_from_table(table, config, grid=grid)


def conditioned_spectra(
    table: CouplingTable,
    config: SpectrumConfig,
    target_field: int,
    *,
    grid: np.ndarray | None = None,
) -> tuple[StickSpectrum, StickSpectrum]:
    """Spectra of the configurations with NN field == target vs. all others.

    The pair shares one grid, so the two curves feed addressability_metric
    directly.  Raises ValueError when one side is empty (degenerate split).
    """
    d = table.d
    freqs, weights, nn_field = _enumerate_configs(d, table.nn, config)
    on = nn_field == target_field
    if not on.any() or on.all():
        raise ValueError(f"NN field {target_field} does not split the configurations")
    tol = 1e-6 * np.max(np.abs(d)) if len(d) else 1e-12
    f_on, w_on = merge_sticks(freqs[on], weights[on], tol)
    f_off, w_off = merge_sticks(freqs[~on], weights[~on], tol)
    w_on = w_on / w_on.sum()
    w_off = w_off / w_off.sum()
    if grid is None:
        fmax = max(np.max(np.abs(f_on)), np.max(np.abs(f_off)))
        grid = _grid_for(float(fmax), config)
    sigma = config.broadening_hz
    return (
        StickSpectrum(f_on, w_on).broadened(grid, sigma),
        StickSpectrum(f_off, w_off).broadened(grid, sigma),
    )


def addressability_metric(spec_on: StickSpectrum, spec_off: StickSpectrum) -> float:
    """Overlap of two normalized broadened curves: 0 = perfectly addressable,
    1 = indistinguishable."""
    if spec_on.grid is None or spec_off.grid is None:
        raise ValueError("spectra must be broadened before comparison")
    if not np.array_equal(spec_on.grid, spec_off.grid):
        raise ValueError("spectra live on different grids")
    overlap = np.trapezoid(np.minimum(spec_on.curve, spec_off.curve), spec_on.grid)
    return float(min(max(overlap, 0.0), 1.0))


@dataclass
class ModelReport:
    spectrum: StickSpectrum
    score: float
    on: StickSpectrum
    off: StickSpectrum


@dataclass
class ModelComparison:
    probe: Site
    target_field: int
    grid: np.ndarray
    models: dict  # name -> ModelReport


def compare_models(
    probe: Site,
    geometry: LatticeGeometry,
    lattice: PyramidLattice,
    *,
    config: SpectrumConfig = SpectrumConfig(),
    target_field: int = -2,
) -> ModelComparison:
    """Ideal-NN vs. full-dipolar vs. homonuclear-suppressed, on one grid."""
    variants = {
        "ideal-nn": replace(config, model="ideal-nn", suppress_homonuclear=False),
        "full-dipolar": replace(config, model="full-dipolar", suppress_homonuclear=False),
        "suppressed": replace(config, model="full-dipolar", suppress_homonuclear=True),
    }
    tables = {
        name: model_table(probe, geometry, cfg, lattice=lattice)
        for name, cfg in variants.items()
    }
    fmax = 0.0
    raw = {}
    for name, cfg in variants.items():
        freqs, weights, nn_field = _enumerate_configs(tables[name].d, tables[name].nn, cfg)
        raw[name] = (freqs, weights, nn_field)
        if len(freqs):
            fmax = max(fmax, float(np.max(np.abs(freqs))))
    grid = _grid_for(fmax, config)

    models = {}
    for name, cfg in variants.items():
        table = tables[name]
        spec = spectrum_from_table(table, cfg, grid=grid)
        on, off = conditioned_spectra(table, cfg, target_field, grid=grid)
        models[name] = ModelReport(
            spectrum=spec, score=addressability_metric(on, off), on=on, off=off
        )
    return ModelComparison(probe=probe, target_field=target_field, grid=grid, models=models)
