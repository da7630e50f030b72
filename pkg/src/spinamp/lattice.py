"""Pyramid lattice: site set, species checkerboard, and neighbor topology.

The lattice is the corner of a cubic (in lattice coordinates) crystal: all
integer sites (x, y, z) with x, y, z >= 0 and x + y + z <= L - 1.  Layer
``l`` collects the sites with x + y + z = l - 1, so the apex (0, 0, 0) is
layer 1 and layer l holds l(l+1)/2 sites.  Sites are indexed layer-major:
layer slices are contiguous id ranges, and within a layer ids run row-major
over (x, y).

Species alternate with coordinate parity: even x+y+z is species A, odd is
species B, so every nearest-neighbor (Manhattan distance 1) pair is
heteronuclear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import SizingError

#: Default ceiling on lattice sites for full topology construction.
DEFAULT_MAX_SITES = 250_000_000


class Species(Enum):
    A = 0
    B = 1

    @property
    def other(self) -> "Species":
        return Species.B if self is Species.A else Species.A


class Site(NamedTuple):
    x: int
    y: int
    z: int

    @property
    def layer(self) -> int:
        return self.x + self.y + self.z + 1

    @property
    def species(self) -> Species:
        return Species.A if (self.x + self.y + self.z) % 2 == 0 else Species.B


def site_count(L: int) -> int:
    """Total sites in an L-layer pyramid: L(L+1)(L+2)/6."""
    return L * (L + 1) * (L + 2) // 6


def layer_size(layer: int) -> int:
    """Sites in one layer: l(l+1)/2."""
    return layer * (layer + 1) // 2


def layer_offset(layer: int) -> int:
    """Dense id of the first site of `layer` (1-based)."""
    return (layer - 1) * layer * (layer + 1) // 6


def layer_species(layer: int) -> Species:
    return Species.A if layer % 2 == 1 else Species.B


def site_to_id(site: Site) -> int:
    """Dense layer-major id of a site."""
    l = site.layer
    return layer_offset(l) + site.x * l - site.x * (site.x - 1) // 2 + site.y


def ids_from_coords(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized site -> dense id mapping."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    lay = x + y + z + 1
    off = (lay - 1) * lay * (lay + 1) // 6
    return off + x * lay - x * (x - 1) // 2 + y


def layer_coords(layer: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, y, z) arrays of one layer in id order."""
    counts = layer - np.arange(layer)
    x = np.repeat(np.arange(layer), counts)
    starts = np.repeat(np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    y = np.arange(counts.sum()) - starts
    z = layer - 1 - x - y
    return x, y, z


# Unit moves along the three lattice axes, +/- each.
_NEIGHBOR_OFFSETS = np.array(
    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
    dtype=np.int64,
)


@dataclass(frozen=True)
class PyramidLattice:
    """Immutable pyramid topology with dense layer-major site ids."""

    L: int
    n_sites: int
    layer_offsets: np.ndarray  # shape (L+1,), offsets[l-1] = first id of layer l
    coords: np.ndarray  # shape (n_sites, 3) int32
    neighbor_indptr: np.ndarray | None = field(default=None, repr=False)
    neighbor_ids: np.ndarray | None = field(default=None, repr=False)

    def __contains__(self, site: Site) -> bool:
        x, y, z = site
        return x >= 0 and y >= 0 and z >= 0 and x + y + z <= self.L - 1

    def site(self, site_id: int) -> Site:
        x, y, z = self.coords[site_id]
        return Site(int(x), int(y), int(z))

    def id_of(self, site: Site) -> int:
        if site not in self:
            raise ValueError(f"site {tuple(site)} outside pyramid of {self.L} layers")
        return site_to_id(site)

    def layer_slice(self, layer: int) -> slice:
        if not 1 <= layer <= self.L:
            raise ValueError(f"layer {layer} outside 1..{self.L}")
        return slice(int(self.layer_offsets[layer - 1]), int(self.layer_offsets[layer]))

    @property
    def has_neighbors(self) -> bool:
        return self.neighbor_indptr is not None

    def neighbor_ids_of(self, site_id: int) -> np.ndarray:
        if self.neighbor_indptr is None:
            raise ValueError("lattice built without neighbor lists")
        return self.neighbor_ids[self.neighbor_indptr[site_id] : self.neighbor_indptr[site_id + 1]]


def build_pyramid(
    L: int,
    *,
    with_neighbors: bool = True,
    max_sites: int = DEFAULT_MAX_SITES,
) -> PyramidLattice:
    """Construct the L-layer pyramid (coordinates and, optionally, CSR neighbor lists).

    Raises SizingError when the site count exceeds `max_sites`, and a tighter
    implicit budget (max_sites or 2**31 ids) when neighbor lists are requested.
    """
    if L < 1:
        raise ValueError(f"layer count must be >= 1, got {L}")
    n = site_count(L)
    if n > max_sites:
        raise SizingError(
            f"pyramid with L={L} has {n} sites, exceeding the budget of {max_sites}"
        )
    offsets = np.array([layer_offset(l) for l in range(1, L + 2)], dtype=np.int64)

    xs, ys, zs = [], [], []
    for l in range(1, L + 1):
        x, y, z = layer_coords(l)
        xs.append(x)
        ys.append(y)
        zs.append(z)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    z = np.concatenate(zs)
    coords = np.stack([x, y, z], axis=1).astype(np.int32)

    indptr = nbr_ids = None
    if with_neighbors:
        if n >= 2**31:
            raise SizingError(
                f"neighbor lists need 32-bit ids; {n} sites exceed 2**31"
            )
        valid_cols = []
        id_cols = []
        for dx, dy, dz in _NEIGHBOR_OFFSETS:
            nx, ny, nz = x + dx, y + dy, z + dz
            ok = (nx >= 0) & (ny >= 0) & (nz >= 0) & (nx + ny + nz <= L - 1)
            ids = np.where(ok, ids_from_coords(nx, ny, nz), -1)
            valid_cols.append(ok)
            id_cols.append(ids)
        valid = np.stack(valid_cols, axis=1)
        all_ids = np.stack(id_cols, axis=1)
        counts = valid.sum(axis=1)
        indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        nbr_ids = all_ids[valid].astype(np.int32)

    return PyramidLattice(
        L=L,
        n_sites=n,
        layer_offsets=offsets,
        coords=coords,
        neighbor_indptr=indptr,
        neighbor_ids=nbr_ids,
    )


def neighbors_of(lattice: PyramidLattice, site: Site) -> list[Site]:
    """All in-pyramid sites at Manhattan distance 1 from `site`."""
    if site not in lattice:
        raise ValueError(f"site {tuple(site)} outside pyramid of {lattice.L} layers")
    out = []
    for dx, dy, dz in _NEIGHBOR_OFFSETS:
        cand = Site(site.x + int(dx), site.y + int(dy), site.z + int(dz))
        if cand in lattice:
            out.append(cand)
    return out


def classify_site(lattice: PyramidLattice, site: Site) -> str:
    """Site class by number of missing-neighbor planes.

    The three coordinate planes (x=0, y=0, z=0) are physical surfaces; the
    bottom layer L is the artificial cut and counts as one more plane.
    Returns one of 'interior', 'face', 'edge', 'corner'.
    """
    if site not in lattice:
        raise ValueError(f"site {tuple(site)} outside pyramid of {lattice.L} layers")
    planes = (site.x == 0) + (site.y == 0) + (site.z == 0)
    planes += site.layer == lattice.L
    if planes == 0:
        return "interior"
    if planes == 1:
        return "face"
    if planes == 2:
        return "edge"
    return "corner"
