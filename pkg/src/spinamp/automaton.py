"""Field-conditioned flip automaton on the pyramid lattice.

One *phase* applies the NOT rule to every spin of one species whose neighbor
field (up neighbors minus down neighbors) lies in the phase's target set,
default {-2, -1, 0}.  Phases alternate species starting with B; a full B+A
pair is a *step*.  A +1 seed at the apex then drives a wavefront that flips
layer p+1 on phase p; a -1 seed leaves the lattice untouched.

Fields only ever depend on the opposite species, so the pulses of one phase
commute and in-place evaluation equals double buffering.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, _swar
from .lattice import (
    PyramidLattice,
    Site,
    Species,
    layer_offset,
    layer_size,
    layer_species,
    site_count,
    site_to_id,
)

DEFAULT_FIELDS = (-2, -1, 0)
EXTENDED_FIELDS = (-2, -1, 0, 1)  # +1 extension, corrects some edge errors

BOUNDARY_MODES = ("embedded", "open")


def _field_mask(fields) -> int:
    mask = 0
    for f in fields:
        if not -6 <= f <= 6:
            raise ValueError(f"neighbor field {f} outside [-6, 6]")
        mask |= 1 << (f + 6)
    return mask


class SpinState:
    """Bit-packed +/-1 spin assignment over the pyramid's dense site ids.

    Bit 1 is spin +1 (up).  Storage is a uint64 word array (two spare zero
    words at the end let kernels read past the data); `bits` is the logical
    little-endian byte view.  Padding bits past n_sites are kept zero so
    whole-array popcounts are exact.
    """

    __slots__ = ("L", "n_sites", "words", "bits")

    def __init__(self, L: int, bits: np.ndarray | bytes | None = None):
        self.L = L
        self.n_sites = site_count(L)
        nbytes = (self.n_sites + 7) // 8
        self.words = np.zeros((self.n_sites + 63) // 64 + 2, dtype=np.uint64)
        self.bits = self.words.view(np.uint8)[:nbytes]
        if bits is not None:
            raw = np.frombuffer(bits, dtype=np.uint8) if isinstance(bits, bytes) else bits
            if len(raw) != nbytes:
                raise ValueError(f"expected {nbytes} bytes for L={L}, got {len(raw)}")
            self.bits[:] = raw

    @classmethod
    def all_down(cls, L: int) -> "SpinState":
        return cls(L)

    def copy(self) -> "SpinState":
        return SpinState(self.L, self.bits)

    def get(self, site_id: int) -> int:
        return 2 * int(self.bits[site_id >> 3] >> (site_id & 7) & 1) - 1

    def set(self, site_id: int, value: int) -> None:
        if value not in (-1, 1):
            raise ValueError(f"spin value must be +-1, got {value}")
        byte, bit = site_id >> 3, site_id & 7
        if value > 0:
            self.bits[byte] |= np.uint8(1 << bit)
        else:
            self.bits[byte] &= np.uint8(~(1 << bit) & 0xFF)

    def values(self) -> np.ndarray:
        """Dense +/-1 int8 array (unpacked; small lattices only)."""
        raw = np.unpackbits(self.bits, bitorder="little")[: self.n_sites]
        return (2 * raw.astype(np.int8) - 1).astype(np.int8)

    def set_values(self, values: np.ndarray) -> None:
        raw = (np.asarray(values) > 0).astype(np.uint8)
        if len(raw) != self.n_sites:
            raise ValueError("length mismatch")
        self.bits[:] = np.packbits(raw, bitorder="little")

    def up_count(self) -> int:
        return int(np.bitwise_count(self.bits).sum())

    def up_count_range(self, start: int, stop: int) -> int:
        if stop <= start:
            return 0
        return int(_kernels.popcount_range(self.bits, start, stop, _kernels.POPCOUNT8))

    def layer_up_counts(self) -> np.ndarray:
        out = np.empty(self.L, dtype=np.int64)
        for l in range(1, self.L + 1):
            out[l - 1] = self.up_count_range(layer_offset(l), layer_offset(l + 1))
        return out

    @property
    def magnetization(self) -> int:
        return 2 * self.up_count() - self.n_sites

    def to_bytes(self) -> bytes:
        return self.bits.tobytes()

    @classmethod
    def from_bytes(cls, L: int, payload: bytes) -> "SpinState":
        return cls(L, np.frombuffer(payload, dtype=np.uint8).copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpinState)
            and self.L == other.L
            and bool(np.array_equal(self.bits, other.bits))
        )


def seed_apex(state: SpinState, value: int) -> SpinState:
    """Set the apex spin (id 0); all other spins untouched."""
    state.set(0, value)
    return state


def neighbor_field(state: SpinState, site: Site, *, boundary: str = "embedded") -> int:
    """Sum of neighbor spin values; bottom-layer sites get 3 virtual down
    children in 'embedded' mode."""
    x, y, z = site
    if x < 0 or y < 0 or z < 0 or x + y + z > state.L - 1:
        raise ValueError(f"site {tuple(site)} outside pyramid of {state.L} layers")
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"boundary mode must be one of {BOUNDARY_MODES}")
    total = 0
    for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
        nx, ny, nz = x + dx, y + dy, z + dz
        if nx >= 0 and ny >= 0 and nz >= 0 and nx + ny + nz <= state.L - 1:
            total += state.get(site_to_id(Site(nx, ny, nz)))
    if boundary == "embedded" and site.layer == state.L:
        total -= 3  # virtual always-down children below the cut
    return total


@dataclass
class PhaseRecord:
    phase: int
    species: str
    flips: int
    up_count: int
    magnetization: int


@dataclass
class RunTrace:
    """Per-phase history of one automaton run."""

    L: int
    records: list[PhaseRecord] = field(default_factory=list)
    fields_per_phase: int = len(DEFAULT_FIELDS)

    @property
    def n_phases(self) -> int:
        return len(self.records)

    @property
    def n_steps(self) -> int:
        """Completed B+A step pairs."""
        return self.n_phases // 2

    @property
    def n_field_pulses(self) -> int:
        return self.n_phases * self.fields_per_phase

    @property
    def total_flips(self) -> int:
        return sum(r.flips for r in self.records)

    @property
    def final_up_count(self) -> int:
        return self.records[-1].up_count if self.records else 0

    def write_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["phase", "species", "flips", "up_count", "magnetization"])
        for r in self.records:
            w.writerow([r.phase, r.species, r.flips, r.up_count, r.magnetization])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, L: int = 0) -> "RunTrace":
        rows = list(csv.DictReader(io.StringIO(text)))
        recs = [
            PhaseRecord(
                int(r["phase"]), r["species"], int(r["flips"]),
                int(r["up_count"]), int(r["magnetization"]),
            )
            for r in rows
        ]
        return cls(L=L, records=recs)


def _omission_ranks(rng, count: int, eps1: float) -> np.ndarray:
    """Sorted ranks of targets lost to i.i.d. Bernoulli(eps1) gate failures,
    sampled by geometric skipping (O(count * eps1) variates)."""
    if eps1 >= 1.0:
        return np.arange(count, dtype=np.int64)
    chunks = []
    pos = -1
    est = int(count * eps1 + 6 * (count * eps1 + 1) ** 0.5 + 16)
    while pos < count:
        gaps = rng.geometric(eps1, size=est)
        idx = pos + np.cumsum(gaps)
        chunks.append(idx)
        pos = int(idx[-1])
        est = 16 + int((count - pos) * eps1 * 2)
    ranks = np.concatenate(chunks)
    return ranks[ranks < count].astype(np.int64)


class Engine:
    """Optimized automaton driver over a bit-packed state.

    Scanning is restricted to layers whose targets may have changed: a layer
    is rescanned only if its previous scan found targets or a neighboring
    layer (or itself) flipped since.  A layer skipped under this rule is
    guaranteed target-free, so the optimization is RNG- and result-neutral
    versus a full scan (`full_scan=True` forces the naive behavior).
    """

    def __init__(
        self,
        L: int,
        *,
        boundary: str = "embedded",
        rule_fields=DEFAULT_FIELDS,
        state: SpinState | None = None,
    ):
        if boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary mode must be one of {BOUNDARY_MODES}")
        self.L = L
        self.boundary = boundary
        self.rule_fields = tuple(rule_fields)
        self._mask = _field_mask(self.rule_fields)
        self.state = state if state is not None else SpinState.all_down(L)
        if self.state.L != L:
            raise ValueError("state size mismatch")
        # index 1..L; True = must scan at the layer's next species phase
        self._pending = np.ones(L + 2, dtype=bool)
        self._mask_buf = np.empty((layer_size(L) + 63) // 64 + 1, dtype=np.uint64)
        self.phase_index = 0

    @staticmethod
    @functools.lru_cache(maxsize=32)
    def _allowed_table(mask: int) -> np.ndarray:
        """(neighbor count, up count) -> targeted, from the field bitmask."""
        table = np.zeros((7, 7), dtype=np.uint8)
        for n in range(7):
            for u in range(n + 1):
                table[n, u] = (mask >> (2 * u - n + 6)) & 1
        return table

    def mark_all_pending(self) -> None:
        self._pending[:] = True

    def force_spin(self, site: Site, value: int) -> None:
        """External spin override (error injection); keeps scan bookkeeping valid."""
        sid = site_to_id(site)
        self.state.set(sid, value)
        l = site.layer
        self._pending[max(l - 1, 1) : min(l + 1, self.L) + 1] = True

    def _scan_layer(self, layer: int, mask: int, rng, eps1: float) -> tuple[int, int]:
        embedded = self.boundary == "embedded"
        buf = self._mask_buf
        cnt = _swar.build_target_mask(
            self.state.words, self.L, layer, self._allowed_table(mask), embedded, buf
        )
        if cnt == 0:
            self._pending[layer] = False
            return 0, 0
        nw = (layer_size(layer) + 63) // 64
        removed = 0
        if eps1 > 0.0:
            ranks = _omission_ranks(rng, cnt, eps1)
            if len(ranks):
                removed = _swar.clear_ranks(buf, nw, ranks)
        flips = cnt - removed
        if flips:
            _swar.xor_mask(self.state.words, buf, nw, layer_offset(layer))
        # any surviving target (flipped or omitted) requires a rescan
        self._pending[layer] = True
        if flips:
            if layer > 1:
                self._pending[layer - 1] = True
            if layer < self.L:
                self._pending[layer + 1] = True
        return cnt, flips

    def run_phase(
        self,
        species: Species,
        *,
        fields=None,
        rng=None,
        eps1: float = 0.0,
        full_scan: bool = False,
    ) -> int:
        """Apply one species phase; returns the number of spins flipped."""
        mask = self._mask if fields is None else _field_mask(fields)
        start = 1 if species is Species.A else 2
        total_flips = 0
        for layer in range(start, self.L + 1, 2):
            if full_scan or self._pending[layer]:
                _, flips = self._scan_layer(layer, mask, rng, eps1)
                total_flips += flips
        self.phase_index += 1
        return total_flips

    def run(
        self,
        phases: int,
        *,
        rng=None,
        eps1: float = 0.0,
        full_scan: bool = False,
        trace: RunTrace | None = None,
    ) -> RunTrace:
        """Run `phases` alternating phases starting with species B."""
        if trace is None:
            trace = RunTrace(L=self.L, fields_per_phase=len(self.rule_fields))
        for p in range(phases):
            species = Species.B if p % 2 == 0 else Species.A
            flips = self.run_phase(species, rng=rng, eps1=eps1, full_scan=full_scan)
            up = self.state.up_count()
            trace.records.append(
                PhaseRecord(
                    phase=self.phase_index,
                    species=species.name,
                    flips=flips,
                    up_count=up,
                    magnetization=2 * up - self.state.n_sites,
                )
            )
        return trace


def apply_pulse(
    state: SpinState,
    species: Species,
    field_value: int,
    *,
    boundary: str = "embedded",
) -> int:
    """Flip every `species` spin whose neighbor field equals `field_value`.

    Fields are evaluated against the pre-pulse state; since only the opposite
    species contributes to them, in-place evaluation is exact.
    """
    eng = Engine(state.L, boundary=boundary, rule_fields=(field_value,), state=state)
    return eng.run_phase(species, full_scan=True)


def run_phase(
    state: SpinState,
    species: Species,
    fields=DEFAULT_FIELDS,
    *,
    boundary: str = "embedded",
) -> int:
    """Apply all field pulses of one phase simultaneously; returns flips."""
    eng = Engine(state.L, boundary=boundary, rule_fields=fields, state=state)
    return eng.run_phase(species, full_scan=True)


def run_ideal(
    lattice: PyramidLattice | int,
    seed: int,
    phases: int,
    *,
    boundary: str = "embedded",
    rule_fields=DEFAULT_FIELDS,
    full_scan: bool = False,
) -> tuple[SpinState, RunTrace]:
    """Noiseless run from the all-down state with the apex seeded to +-1."""
    L = lattice if isinstance(lattice, int) else lattice.L
    if phases < 0:
        raise ValueError("phase count must be >= 0")
    eng = Engine(L, boundary=boundary, rule_fields=rule_fields)
    seed_apex(eng.state, seed)
    trace = eng.run(phases, full_scan=full_scan)
    return eng.state, trace


def predicted_flip_count(n: int) -> int:
    """Up-spin count after n stages per the closed form (n+1)n(n-1)/6.

    This counts layers 1..n-1 plus nothing else -- one layer fewer than the
    "first n layers flipped" reading, which is `site_count(n)`; both are
    exposed and the tests document the discrepancy.
    """
    if n < 1:
        raise ValueError("stage count must be >= 1")
    return (n + 1) * n * (n - 1) // 6
