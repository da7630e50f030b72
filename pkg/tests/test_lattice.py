import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinamp.errors import SizingError
from spinamp.lattice import (
    PyramidLattice,
    Site,
    Species,
    build_pyramid,
    classify_site,
    ids_from_coords,
    layer_coords,
    layer_offset,
    layer_size,
    layer_species,
    neighbors_of,
    site_count,
    site_to_id,
)


def brute_sites(L):
    return [
        (x, y, z)
        for x in range(L)
        for y in range(L - x)
        for z in range(L - x - y)
    ]


def test_counting_formulas():
    for L in range(1, 30):
        assert site_count(L) == len(brute_sites(L))
        assert layer_size(L) == sum(
            1 for s in brute_sites(L) if sum(s) == L - 1
        )
        assert layer_offset(L) == site_count(L - 1)
    assert site_count(200) == 1_353_400
    assert site_count(202) == 1_394_204


def test_id_mapping_is_layer_major_dense():
    L = 9
    sites = sorted(brute_sites(L), key=lambda s: (sum(s), s[0], s[1]))
    for i, (x, y, z) in enumerate(sites):
        assert site_to_id(Site(x, y, z)) == i
    arr = np.array(sites)
    assert np.array_equal(
        ids_from_coords(arr[:, 0], arr[:, 1], arr[:, 2]), np.arange(len(sites))
    )


def test_layer_coords_matches_ids():
    for layer in (1, 2, 5, 11):
        x, y, z = layer_coords(layer)
        assert len(x) == layer_size(layer)
        assert np.all(x + y + z == layer - 1)
        ids = ids_from_coords(x, y, z)
        assert np.array_equal(ids, np.arange(layer_offset(layer), layer_offset(layer + 1)))


def test_species_checkerboard():
    assert Site(0, 0, 0).species is Species.A
    assert Site(1, 0, 0).species is Species.B
    assert Species.A.other is Species.B
    for layer in range(1, 10):
        assert layer_species(layer) is (Species.A if layer % 2 else Species.B)
    lat = build_pyramid(6)
    for sid in range(lat.n_sites):
        site = lat.site(sid)
        for nb in neighbors_of(lat, site):
            assert nb.species is site.species.other


def test_build_pyramid_neighbors_vs_bruteforce():
    for L in (1, 2, 3, 7, 12):
        lat = build_pyramid(L)
        assert lat.n_sites == site_count(L)
        for sid in range(lat.n_sites):
            site = lat.site(sid)
            expected = sorted(site_to_id(n) for n in neighbors_of(lat, site))
            got = sorted(lat.neighbor_ids_of(sid).tolist())
            assert got == expected
        assert lat.neighbor_indptr[-1] == len(lat.neighbor_ids)


def test_layer_slices_partition_ids():
    lat = build_pyramid(8)
    seen = []
    for layer in range(1, 9):
        sl = lat.layer_slice(layer)
        seen.extend(range(sl.start, sl.stop))
        lays = lat.coords[sl].sum(axis=1) + 1
        assert np.all(lays == layer)
    assert seen == list(range(lat.n_sites))
    with pytest.raises(ValueError):
        lat.layer_slice(0)
    with pytest.raises(ValueError):
        lat.layer_slice(9)


def test_membership_and_errors():
    lat = build_pyramid(5)
    assert Site(0, 0, 4) in lat
    assert Site(0, 0, 5) not in lat
    assert Site(-1, 0, 0) not in lat
    with pytest.raises(ValueError):
        lat.id_of(Site(5, 0, 0))
    with pytest.raises(ValueError):
        neighbors_of(lat, Site(0, 0, 9))
    with pytest.raises(ValueError):
        build_pyramid(0)


def test_sizing_budget():
    with pytest.raises(SizingError):
        build_pyramid(100, max_sites=1000)
    # without neighbor lists only the site budget applies
    lat = build_pyramid(30, with_neighbors=False, max_sites=site_count(30))
    assert not lat.has_neighbors
    with pytest.raises(ValueError):
        lat.neighbor_ids_of(0)


def test_classify_site():
    lat = build_pyramid(6)
    assert classify_site(lat, Site(0, 0, 0)) == "corner"  # apex: three planes meet
    assert classify_site(lat, Site(1, 1, 1)) == "interior"
    assert classify_site(lat, Site(0, 1, 1)) == "face"
    assert classify_site(lat, Site(0, 0, 2)) == "edge"
    assert classify_site(lat, Site(5, 0, 0)) == "corner"  # bottom layer + two planes
    assert classify_site(lat, Site(1, 1, 3)) == "face"  # bottom layer only
    # every site of a small pyramid gets a class
    for sid in range(lat.n_sites):
        assert classify_site(lat, lat.site(sid)) in ("interior", "face", "edge", "corner")


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 14), st.integers(0, 14), st.integers(0, 14))
def test_site_roundtrip_property(x, y, z):
    site = Site(x, y, z)
    lat = build_pyramid(x + y + z + 1, with_neighbors=False)
    sid = lat.id_of(site)
    assert lat.site(sid) == site
    assert site.layer == x + y + z + 1


def test_lattice_is_immutable():
    lat = build_pyramid(4)
    assert isinstance(lat, PyramidLattice)
    with pytest.raises(AttributeError):
        lat.L = 5
