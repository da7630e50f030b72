import math

import numpy as np
import pytest

from spinamp.geometry import (
    GEOMETRY_PRESETS,
    CouplingTable,
    LatticeGeometry,
    coupling_table,
    dipolar_coupling,
    ideal_nn_table,
)
from spinamp.lattice import Site, build_pyramid

MAGIC = math.acos(1 / math.sqrt(3))


def test_presets_and_validation():
    cubic = LatticeGeometry.preset("cubic")
    assert math.isclose(cubic.alpha, math.pi / 2)
    rhombo = LatticeGeometry.preset("rhombo60")
    assert math.isclose(rhombo.alpha, math.pi / 3)
    with pytest.raises(ValueError):
        LatticeGeometry.preset("hexagonal")
    with pytest.raises(ValueError):
        LatticeGeometry(math.pi / 2, math.pi / 2, math.pi / 3)
    with pytest.raises(ValueError):
        LatticeGeometry(2.2, 2.2, 2.2)  # >= 2pi/3 degenerates
    with pytest.raises(ValueError):
        LatticeGeometry(math.pi / 2, math.pi / 2, math.pi / 2, a=0.0)


@pytest.mark.parametrize("name", sorted(GEOMETRY_PRESETS))
def test_primitive_vectors_geometry(name):
    geo = LatticeGeometry.preset(name, a=1.7)
    vecs = geo.primitive_vectors
    lengths = np.linalg.norm(vecs, axis=1)
    assert np.allclose(lengths, geo.a)
    for i in range(3):
        j = (i + 1) % 3
        cos_ij = vecs[i] @ vecs[j] / (lengths[i] * lengths[j])
        assert math.isclose(cos_ij, math.cos(geo.alpha), abs_tol=1e-12)
    diag = vecs.sum(axis=0)
    assert abs(diag[0]) < 1e-12 and abs(diag[1]) < 1e-12
    assert diag[2] > 0


def test_cubic_nn_bonds_sit_at_magic_angle():
    geo = LatticeGeometry.preset("cubic")
    for vec in geo.primitive_vectors:
        theta = math.acos(vec[2] / np.linalg.norm(vec))
        assert math.isclose(theta, MAGIC, abs_tol=1e-12)


def test_dipolar_coupling_formula():
    geo = LatticeGeometry.preset("rhombo60", g_AB=2.0)
    d = dipolar_coupling(geo, Site(0, 0, 0), Site(1, 0, 0))
    vec = geo.primitive_vectors[0]
    r = np.linalg.norm(vec)
    expected = 2.0 / r**3 * (3 * (vec[2] / r) ** 2 - 1) / 2
    assert math.isclose(d, expected)
    # symmetric under exchange
    assert math.isclose(d, dipolar_coupling(geo, Site(1, 0, 0), Site(0, 0, 0)))
    with pytest.raises(ValueError):
        dipolar_coupling(geo, Site(1, 2, 3), Site(1, 2, 3))


def test_coupling_scales_linearly_in_g():
    geo = LatticeGeometry.preset("rhombo60", g_AA=1.0, g_AB=1.0, g_BB=1.0)
    geo3 = LatticeGeometry.preset("rhombo60", g_AA=3.0, g_AB=3.0, g_BB=3.0)
    t1 = coupling_table(geo, Site(1, 0, 0), cutoff=2.0)
    t3 = coupling_table(geo3, Site(1, 0, 0), cutoff=2.0)
    d1 = {tuple(o): d for o, d in zip(t1.offsets, t1.d)}
    d3 = {tuple(o): d for o, d in zip(t3.offsets, t3.d)}
    assert d1.keys() == d3.keys()
    assert all(math.isclose(3.0 * d1[o], d3[o], rel_tol=1e-12) for o in d1)


def test_with_nn_coupling_normalization():
    geo = LatticeGeometry.preset("rhombo60").with_nn_coupling(1000.0)
    table = coupling_table(geo, Site(1, 0, 0), cutoff=1.01)
    hetero_nn = np.abs(table.d[(table.k == 0) & table.nn])
    assert math.isclose(hetero_nn.max(), 1000.0, rel_tol=1e-9)
    with pytest.raises(ValueError):
        LatticeGeometry.preset("cubic").with_nn_coupling(1000.0)


def test_coupling_table_infinite_block():
    geo = LatticeGeometry.preset("rhombo60").with_nn_coupling(1000.0)
    table = coupling_table(geo, Site(5, 5, 5), cutoff=1.5 * geo.a)
    assert len(table) > 0
    # strongest-first ordering
    mags = np.abs(table.d)
    assert np.all(np.diff(mags) <= 1e-12)
    # parity labels: Manhattan-odd offsets are heteronuclear
    parities = np.abs(table.offsets).sum(axis=1) % 2
    assert np.array_equal(table.k == 1, parities == 0)
    # nn flags exactly the six unit offsets
    assert int(table.nn.sum()) == 6


def test_coupling_table_pyramid_truncation():
    geo = LatticeGeometry.preset("rhombo60").with_nn_coupling(1000.0)
    lat = build_pyramid(4)
    apex = coupling_table(geo, Site(0, 0, 0), lattice=lat, cutoff=1.01 * geo.a)
    assert len(apex) == 3  # apex has three in-pyramid neighbors
    assert apex.partner_ids is not None
    with pytest.raises(ValueError):
        coupling_table(geo, Site(9, 9, 9), lattice=lat, cutoff=2.0)
    with pytest.raises(ValueError):
        coupling_table(geo, Site(0, 0, 0), cutoff=-1.0)


def test_empty_table_warns():
    geo = LatticeGeometry.preset("rhombo60")
    with pytest.warns(UserWarning):
        table = coupling_table(geo, Site(0, 0, 0), cutoff=0.1 * geo.a)
    assert len(table) == 0


def test_suppressed_drops_homonuclear_only():
    geo = LatticeGeometry.preset("rhombo60").with_nn_coupling(1000.0)
    table = coupling_table(geo, Site(1, 0, 0), cutoff=2.5 * geo.a)
    sup = table.suppressed()
    assert np.all(sup.k == 0)
    assert len(sup) == int((table.k == 0).sum())
    # suppressed table is a subset of the original
    orig = {tuple(o) for o in table.offsets}
    assert all(tuple(o) in orig for o in sup.offsets)


def test_ideal_nn_table():
    lat = build_pyramid(5)
    table = ideal_nn_table(Site(1, 0, 0), lat, d0=750.0)
    assert isinstance(table, CouplingTable)
    assert len(table) == 4
    assert np.all(table.d == 750.0)
    assert np.all(table.nn)
    assert np.all(table.k == 0)
    with pytest.raises(ValueError):
        ideal_nn_table(Site(9, 0, 0), lat)
