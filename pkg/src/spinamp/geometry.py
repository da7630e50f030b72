"""Real-space geometry and dipolar couplings.

The three primitive vectors have equal length and equal pairwise angles, and
are oriented so that their sum (the pyramid's depth axis) lies along z with
threefold symmetry about it.  For the cubic cell (angles pi/2) every
nearest-neighbor bond then sits at arccos(1/sqrt 3) to z, the magic angle,
and its secular dipolar coupling vanishes.

Couplings follow the secular dipolar form

    d = g / r^3 * (3 cos^2 Theta - 1) / 2

with g chosen per species pair (g_AA, g_AB, g_BB).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .lattice import PyramidLattice, Site

GEOMETRY_PRESETS = {
    "cubic": math.pi / 2,
    "rhombo60": math.pi / 3,
}


@dataclass(frozen=True)
class LatticeGeometry:
    """Primitive cell angles, edge length, and coupling prefactors."""

    alpha: float
    beta: float
    gamma: float
    a: float = 1.0
    g_AA: float = 1.0
    g_AB: float = 1.0
    g_BB: float = 1.0

    def __post_init__(self):
        if not math.isclose(self.alpha, self.beta) or not math.isclose(self.beta, self.gamma):
            raise ValueError("only equal Bravais angles are supported")
        if not 0 < self.alpha < 2 * math.pi / 3:
            raise ValueError(f"angle {self.alpha} outside (0, 2pi/3)")
        if self.a <= 0:
            raise ValueError("edge length must be positive")

    @classmethod
    def preset(cls, name: str, **kwargs) -> "LatticeGeometry":
        try:
            angle = GEOMETRY_PRESETS[name]
        except KeyError:
            raise ValueError(
                f"unknown geometry preset {name!r}; known: {sorted(GEOMETRY_PRESETS)}"
            ) from None
        return cls(alpha=angle, beta=angle, gamma=angle, **kwargs)

    @property
    def primitive_vectors(self) -> np.ndarray:
        """Rows a1, a2, a3; body diagonal a1+a2+a3 along z."""
        c = math.cos(self.alpha)
        h = self.a * math.sqrt((1 + 2 * c) / 3)
        rho = self.a * math.sqrt(2 * (1 - c) / 3)
        vecs = np.empty((3, 3))
        for i, phi in enumerate((0.0, 2 * math.pi / 3, 4 * math.pi / 3)):
            vecs[i] = (rho * math.cos(phi), rho * math.sin(phi), h)
        return vecs

    def position(self, site: Site) -> np.ndarray:
        return self.positions(np.array([site], dtype=np.int64))[0]

    def positions(self, coords: np.ndarray) -> np.ndarray:
        """Cartesian positions for an (n, 3) array of lattice coordinates."""
        return np.asarray(coords, dtype=np.float64) @ self.primitive_vectors

    def g_for(self, same_species: bool, species_a_pair: bool = False) -> float:
        if not same_species:
            return self.g_AB
        return self.g_AA if species_a_pair else self.g_BB

    def with_nn_coupling(self, target_hz: float = 1000.0) -> "LatticeGeometry":
        """Rescale all g so the largest heteronuclear NN |coupling| is `target_hz`.

        Raises ValueError in the magic-angle degenerate case (cubic cell) where
        every NN coupling is zero.
        """
        vecs = self.primitive_vectors
        r = np.linalg.norm(vecs, axis=1)
        cos2 = (vecs[:, 2] / r) ** 2
        angular = np.abs(3 * cos2 - 1) / 2
        ref = float(np.max(angular / r**3))
        if ref < 1e-12:
            raise ValueError("nearest-neighbor couplings vanish (magic angle); cannot normalize")
        scale = target_hz / (self.g_AB * ref)
        return replace(
            self, g_AA=self.g_AA * scale, g_AB=self.g_AB * scale, g_BB=self.g_BB * scale
        )


def dipolar_coupling(geometry: LatticeGeometry, site_i: Site, site_j: Site) -> float:
    """Secular dipolar coupling between two lattice sites, in Hz."""
    if tuple(site_i) == tuple(site_j):
        raise ValueError(f"coincident sites {tuple(site_i)}")
    delta = np.array(
        [site_j.x - site_i.x, site_j.y - site_i.y, site_j.z - site_i.z], dtype=np.float64
    )
    r_vec = delta @ geometry.primitive_vectors
    r = float(np.linalg.norm(r_vec))
    cos2 = (r_vec[2] / r) ** 2
    same = site_i.species is site_j.species
    g = geometry.g_for(same, species_a_pair=same and site_i.species.name == "A")
    return g / r**3 * (3 * cos2 - 1) / 2


@dataclass(frozen=True)
class CouplingTable:
    """Dipolar partners of one probed site, strongest first.

    offsets are lattice-coordinate deltas partner - probe; `partner_ids` is
    filled only when the table was built from an explicit pyramid.  `k` is 1
    for homonuclear (same species) partners and `nn` flags Manhattan
    distance 1.
    """

    probe: Site
    offsets: np.ndarray  # (m, 3) int64
    d: np.ndarray  # (m,) Hz
    k: np.ndarray  # (m,) uint8
    nn: np.ndarray  # (m,) bool
    partner_ids: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.d)

    def suppressed(self) -> "CouplingTable":
        """Drop all homonuclear entries."""
        keep = self.k == 0
        return CouplingTable(
            probe=self.probe,
            offsets=self.offsets[keep],
            d=self.d[keep],
            k=self.k[keep],
            nn=self.nn[keep],
            partner_ids=None if self.partner_ids is None else self.partner_ids[keep],
        )


def _finish_table(probe, offsets, d, k, nn, ids, min_coupling_hz):
    if len(d) and min_coupling_hz > 0:
        keep = np.abs(d) >= min_coupling_hz
        offsets, d, k, nn = offsets[keep], d[keep], k[keep], nn[keep]
        if ids is not None:
            ids = ids[keep]
    if len(d) == 0:
        warnings.warn("coupling table is empty (cutoff below nearest-neighbor distance?)")
    order = np.argsort(-np.abs(d), kind="stable")
    return CouplingTable(
        probe=probe,
        offsets=offsets[order],
        d=d[order],
        k=k[order],
        nn=nn[order],
        partner_ids=None if ids is None else ids[order],
    )


def coupling_table(
    geometry: LatticeGeometry,
    probe: Site,
    *,
    lattice: PyramidLattice | None = None,
    cutoff: float,
    min_coupling_hz: float = 1e-6,
) -> CouplingTable:
    """All dipolar partners of `probe` within `cutoff` (same distance unit as `a`).

    With a `lattice` the probe's actual pyramid neighborhood is used (surface
    truncation included); otherwise an infinite-crystal block of relative
    offsets around the probe is enumerated.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    vecs = geometry.primitive_vectors
    probe_arr = np.array(probe, dtype=np.int64)

    if lattice is not None:
        if probe not in lattice:
            raise ValueError(f"probe {tuple(probe)} outside pyramid")
        deltas = lattice.coords.astype(np.int64) - probe_arr
        ids = np.arange(lattice.n_sites, dtype=np.int64)
    else:
        # Bounding box: |n_i| <= cutoff * ||row_i of A^-1||.
        inv = np.linalg.inv(vecs)
        radii = np.ceil(cutoff * np.linalg.norm(inv, axis=0)).astype(int)
        grids = np.meshgrid(*(np.arange(-r, r + 1) for r in radii), indexing="ij")
        deltas = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
        ids = None

    r_vec = deltas @ vecs
    r = np.linalg.norm(r_vec, axis=1)
    within = (r > 0) & (r <= cutoff)
    deltas, r_vec, r = deltas[within], r_vec[within], r[within]
    if ids is not None:
        ids = ids[within]

    cos2 = (r_vec[:, 2] / r) ** 2
    parity = deltas.sum(axis=1) % 2
    same = parity == 0
    probe_is_a = probe.species.name == "A"
    g = np.where(same, geometry.g_AA if probe_is_a else geometry.g_BB, geometry.g_AB)
    d = g / r**3 * (3 * cos2 - 1) / 2
    k = same.astype(np.uint8)
    nn = np.abs(deltas).sum(axis=1) == 1
    return _finish_table(probe, deltas, d, k, nn, ids, min_coupling_hz)


def ideal_nn_table(
    probe: Site,
    lattice: PyramidLattice,
    d0: float = 1000.0,
) -> CouplingTable:
    """Idealized model: equal coupling d0 to each in-pyramid nearest neighbor only."""
    if probe not in lattice:
        raise ValueError(f"probe {tuple(probe)} outside pyramid")
    from .lattice import neighbors_of

    nbrs = neighbors_of(lattice, probe)
    m = len(nbrs)
    offsets = np.array(
        [(s.x - probe.x, s.y - probe.y, s.z - probe.z) for s in nbrs], dtype=np.int64
    ).reshape(m, 3)
    ids = np.array([lattice.id_of(s) for s in nbrs], dtype=np.int64)
    return CouplingTable(
        probe=probe,
        offsets=offsets,
        d=np.full(m, d0),
        k=np.zeros(m, dtype=np.uint8),
        nn=np.ones(m, dtype=bool),
        partner_ids=ids,
    )
