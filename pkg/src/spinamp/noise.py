"""Non-coherent Monte Carlo validation of the automaton.

Error model per the bit-flip/omission picture: each spin of the all-down
initial state is flipped with probability eps0 (imperfect polarization), and
each targeted spin fails to flip with probability eps1 (gate omission).  An
optional spin-diffusion pre-step exchanges anti-aligned same-species pairs,
a classical surrogate of the homonuclear flip-flop term.

Every trial is a pure function of (rng_seed, trial_index): independent Philox
streams are derived per (trial, purpose, phase), so serial and parallel
execution agree bit for bit.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import SizingError
from .automaton import (
    DEFAULT_FIELDS,
    EXTENDED_FIELDS,
    Engine,
    PhaseRecord,
    RunTrace,
    SpinState,
    seed_apex,
)
from .lattice import (
    Species,
    build_pyramid,
    classify_site,
    ids_from_coords,
    layer_coords,
    layer_offset,
    site_count,
)

SITE_CLASSES = ("corner", "edge", "face", "interior")

#: Above this site count, per-site extras (coords, error histogram) are skipped.
DETAIL_SITE_LIMIT = 30_000_000

#: Hard per-trial site budget (the bit-packed state alone is ~31 MB here).
MAX_TRIAL_SITES = 250_000_000


def eps0_from_polarization(polarization: float, convention: str = "population") -> float:
    """Map an initial polarization figure to the flip probability eps0.

    'population': polarization is the down-population fraction (90% -> 0.10).
    'magnetization': polarization is (N_down - N_up)/N (90% -> 0.05).
    """
    if not 0 <= polarization <= 1:
        raise ValueError("polarization must lie in [0, 1]")
    if convention == "population":
        return 1.0 - polarization
    if convention == "magnetization":
        return (1.0 - polarization) / 2.0
    raise ValueError(f"unknown polarization convention {convention!r}")


@dataclass(frozen=True)
class NoiseModel:
    eps0: float = 0.0
    eps1: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("eps0", "eps1"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    L: int
    phases: int
    noise: NoiseModel = NoiseModel()
    seed_value: int | str = 1  # +1, -1, or "both"
    extended_rule: bool = False  # add the +1 field to every phase
    diffusion_steps: int = 0
    diffusion_exchange_prob: float = 0.5
    trials: int = 1
    boundary: str = "embedded"
    collect_layer_profile: bool = False
    collect_error_histogram: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.phases <= self.L - 1:
            raise ValueError(f"phases must lie in [0, L-1], got {self.phases} for L={self.L}")
        if self.seed_value not in (1, -1, "both"):
            raise ValueError("seed_value must be +1, -1, or 'both'")
        if self.diffusion_steps < 0:
            raise ValueError("diffusion_steps must be >= 0")

    @property
    def rule_fields(self):
        return EXTENDED_FIELDS if self.extended_rule else DEFAULT_FIELDS


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    up_counts: np.ndarray  # per trial, +1 seed (or the single requested seed)
    up_counts_down_seed: Optional[np.ndarray] = None
    layer_profile: Optional[np.ndarray] = None  # mean up count per layer, +1 seed
    error_histogram: Optional[dict] = None  # mean miss count per site class
    traces: list[RunTrace] = field(default_factory=list)

    @property
    def mean_signal(self) -> float:
        return float(np.mean(self.up_counts))

    @property
    def std_err(self) -> float:
        if len(self.up_counts) < 2:
            return 0.0
        return float(np.std(self.up_counts, ddof=1) / np.sqrt(len(self.up_counts)))

    @property
    def contrast(self) -> Optional[float]:
        if self.up_counts_down_seed is None:
            return None
        return float(np.mean(self.up_counts) - np.mean(self.up_counts_down_seed))


def _stream(rng_seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one (trial, purpose, ...) slot."""
    ss = np.random.SeedSequence(entropy=rng_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


_INIT, _DIFFUSE, _PHASE = 0, 1, 2


def randomize_initial(state: SpinState, eps0: float, rng: np.random.Generator) -> SpinState:
    """Flip each spin of an all-down state independently with probability eps0."""
    if eps0 == 0.0:
        return state
    n = state.n_sites
    chunk_bits = 1 << 23
    for start in range(0, n, chunk_bits):
        m = min(chunk_bits, n - start)
        flips = (rng.random(m) < eps0).astype(np.uint8)
        packed = np.packbits(flips, bitorder="little")
        b0 = start >> 3
        state.bits[b0 : b0 + len(packed)] ^= packed
    return state


def noisy_pulse(
    state: SpinState,
    species: Species,
    field_value: int,
    eps1: float,
    rng: np.random.Generator,
    *,
    boundary: str = "embedded",
) -> int:
    """Single field pulse where each targeted spin flips with probability 1 - eps1."""
    eng = Engine(state.L, boundary=boundary, rule_fields=(field_value,), state=state)
    return eng.run_phase(species, rng=rng, eps1=eps1, full_scan=True)


@functools.lru_cache(maxsize=8)
def diffusion_pairs(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Undirected same-species pair list for the in-layer exchange shell.

    The shell is the e_i - e_j offset family (Manhattan distance 2, same
    layer), the nearest same-species shell of the rhombohedral pi/3 cell and a
    subset of the cubic one.
    """
    lo, hi = [], []
    for l in range(3, L + 1):
        x, y, z = layer_coords(l)
        for dx, dy, dz in ((1, -1, 0), (1, 0, -1), (0, 1, -1)):
            nx, ny, nz = x + dx, y + dy, z + dz
            ok = (nx >= 0) & (ny >= 0) & (nz >= 0)
            lo.append(ids_from_coords(x[ok], y[ok], z[ok]))
            hi.append(ids_from_coords(nx[ok], ny[ok], nz[ok]))
    if not lo:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(lo), np.concatenate(hi)


def diffuse(
    state: SpinState,
    steps: int,
    rng: np.random.Generator,
    *,
    exchange_prob: float = 0.5,
) -> SpinState:
    """Run `steps` exchange sweeps; total magnetization is conserved exactly."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return state
    pair_i, pair_j = diffusion_pairs(state.L)
    if len(pair_i) == 0:
        return state
    for _ in range(steps):
        order = rng.permutation(len(pair_i))
        rands = rng.random(len(pair_i))
        _kernels.diffusion_sweep(state.bits, pair_i, pair_j, order, rands, exchange_prob)
    return state


def run_trial(
    config: ExperimentConfig,
    trial_index: int,
    seed_value: int | None = None,
) -> tuple[SpinState, RunTrace]:
    """One reproducible trial: all-down -> initial noise -> apex seed ->
    diffusion -> noisy phases."""
    if seed_value is None:
        seed_value = config.seed_value if config.seed_value != "both" else 1
    n = site_count(config.L)
    if n > MAX_TRIAL_SITES:
        raise SizingError(
            f"L={config.L} has {n} sites, exceeding the trial budget of {MAX_TRIAL_SITES}"
        )
    noise = config.noise
    eng = Engine(config.L, boundary=config.boundary, rule_fields=config.rule_fields)
    randomize_initial(eng.state, noise.eps0, _stream(noise.rng_seed, trial_index, _INIT))
    seed_apex(eng.state, seed_value)
    if config.diffusion_steps:
        diffuse(
            eng.state,
            config.diffusion_steps,
            _stream(noise.rng_seed, trial_index, _DIFFUSE),
            exchange_prob=config.diffusion_exchange_prob,
        )
    trace = RunTrace(L=config.L, fields_per_phase=len(config.rule_fields))
    for p in range(config.phases):
        species = Species.B if p % 2 == 0 else Species.A
        rng = _stream(noise.rng_seed, trial_index, _PHASE, p)
        flips = eng.run_phase(species, rng=rng, eps1=noise.eps1)
        up = eng.state.up_count()
        trace.records.append(
            PhaseRecord(
                phase=eng.phase_index,
                species=species.name,
                flips=flips,
                up_count=up,
                magnetization=2 * up - eng.state.n_sites,
            )
        )
    return eng.state, trace


def _class_planes(L: int) -> np.ndarray:
    """Per-site count of missing-neighbor planes (0=interior .. 3+=corner)."""
    parts = []
    for l in range(1, L + 1):
        x, y, z = layer_coords(l)
        planes = (x == 0).astype(np.int8) + (y == 0) + (z == 0) + (l == L)
        parts.append(np.minimum(planes, 3).astype(np.int8))
    return np.concatenate(parts)


def _miss_histogram(state: SpinState, phases: int, planes: np.ndarray) -> dict:
    """Down spins inside the expected-up region (layers <= phases+1), by class."""
    top = min(phases + 1, state.L)
    n_top = site_count(top)
    raw = np.unpackbits(state.bits, bitorder="little")[:n_top]
    miss = raw == 0
    hist = {}
    order = ("interior", "face", "edge", "corner")
    for cls_idx, name in enumerate(order):
        hist[name] = int(np.count_nonzero(miss & (planes[:n_top] == cls_idx)))
    return hist


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Aggregate `config.trials` independent trials.

    With seed_value "both", each trial runs the +1 and -1 seeds against the
    same initial-noise stream, so the contrast estimate is variance-reduced.
    """
    both = config.seed_value == "both"
    seeds = (1, -1) if both else (config.seed_value,)

    def one(trial):
        out = []
        for sv in seeds:
            state, trace = run_trial(config, trial, seed_value=sv)
            out.append((sv, state, trace))
        return out

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial_worker, [(config, t, seeds) for t in range(config.trials)]))
    else:
        per_trial = [one(t) for t in range(config.trials)]

    collect_detail = (
        site_count(config.L) <= DETAIL_SITE_LIMIT
        and (config.collect_layer_profile or config.collect_error_histogram)
    )
    planes = _class_planes(config.L) if (collect_detail and config.collect_error_histogram) else None

    ups, downs, profiles, hists, traces = [], [], [], [], []
    for results in per_trial:
        for sv, state, trace in results:
            if sv == 1 or not both:
                ups.append(state.up_count())
                traces.append(trace)
                if collect_detail and config.collect_layer_profile:
                    profiles.append(state.layer_up_counts())
                if planes is not None:
                    hists.append(_miss_histogram(state, config.phases, planes))
            else:
                downs.append(state.up_count())

    hist = None
    if hists:
        hist = {k: float(np.mean([h[k] for h in hists])) for k in hists[0]}
    return ExperimentResult(
        config=config,
        up_counts=np.array(ups, dtype=np.int64),
        up_counts_down_seed=np.array(downs, dtype=np.int64) if downs else None,
        layer_profile=np.mean(profiles, axis=0) if profiles else None,
        error_histogram=hist,
        traces=traces,
    )


def _trial_worker(args):
    config, trial, seeds = args
    return [(sv,) + run_trial(config, trial, seed_value=sv) for sv in seeds]


__all__ = [
    "NoiseModel",
    "ExperimentConfig",
    "ExperimentResult",
    "eps0_from_polarization",
    "randomize_initial",
    "noisy_pulse",
    "diffuse",
    "diffusion_pairs",
    "classify_site",
    "run_trial",
    "run_experiment",
]
