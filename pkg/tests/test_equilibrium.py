import numpy as np
import pytest

from oracles import central_jacobian, support_enumeration
from polydeg import catalog
from polydeg.equilibrium import (
    cluster_components,
    commuted_gps_map,
    displacement,
    enumerate_equilibria,
    flatten,
    gps_displacement_jacobian,
    gps_map,
    gps_w,
    jacobian_certificate,
    split,
)
from polydeg.degree import components_of
from polydeg.polygame import PolytopeGame, is_equilibrium
from polydeg.polytope import OnCellBoundary, simplex
from polydeg.sequence_form import build_enabling_game


def bimatrix(A, B):
    return PolytopeGame.from_multilinear([simplex(A.shape[0]), simplex(A.shape[1])], np.stack([A, B]))


@pytest.mark.parametrize("seed", range(12))
def test_generic_bimatrix_matches_support_enumeration(seed):
    rng = np.random.default_rng(seed)
    m, n = [(2, 2), (3, 3), (3, 4), (4, 4)][seed % 4]
    A, B = rng.normal(size=(m, n)), rng.normal(size=(m, n))
    found = [p.vertices[0] for p in enumerate_equilibria(bimatrix(A, B))]
    truth = [np.concatenate([x, y]) for x, y, _, _ in support_enumeration(A, B)]
    assert len(found) == len(truth)
    assert len(found) % 2 == 1
    for t in truth:
        assert min(np.linalg.norm(t - f) for f in found) < 1e-8


def test_pennies_unique_mixed():
    g = bimatrix(np.array([[1.0, -1], [-1, 1]]), np.array([[-1.0, 1], [1, -1]]))
    pieces = enumerate_equilibria(g)
    assert len(pieces) == 1
    assert pieces[0].vertices[0] == pytest.approx([0.5, 0.5, 0.5, 0.5])


def test_beer_quiche_components():
    comps = components_of(catalog.load_tree("beerquiche"))
    assert len(comps) == 2
    quiche, beer = comps
    assert quiche.continuum and beer.continuum
    # receiver fights after the off-path signal with probability in [1/2, 1]
    f_b = sorted(quiche.points()[:, 4])
    assert f_b[0] == pytest.approx(0.5) and f_b[-1] == pytest.approx(1.0)
    assert np.allclose(quiche.points()[:, :4], [0, 1, 0, 1])
    f_q = sorted(beer.points()[:, 6])
    assert f_q[0] == pytest.approx(0.5) and f_q[-1] == pytest.approx(1.0)
    assert np.allclose(beer.points()[:, :4], [1, 0, 1, 0])


def test_gy_components():
    comps = components_of(catalog.load_tree("gy1"))
    assert len(comps) == 2
    labels = catalog.load("gy1").locators
    catalog.label_components(comps, labels)
    assert sorted(c.label for c in comps) == ["BL", "T"]
    assert len(components_of(catalog.load_tree("gy3"))) == 1


def test_fig1_components_are_equilibria():
    tree = catalog.load_tree("fig1")
    eg = build_enabling_game(tree)
    comps = components_of(tree)
    assert len(comps) == 4
    for c in comps:
        for x in c.samples():
            assert is_equilibrium(eg.game, split(eg.game, x))


def test_every_locator_names_one_component():
    for name in catalog.NAMES:
        ex = catalog.load(name)
        comps = components_of(ex.tree)
        catalog.label_components(comps, ex.locators)
        assert sorted(c.label for c in comps) == sorted(ex.expected)


def test_gps_fixed_points_are_equilibria():
    tree = catalog.load_tree("fig1")
    g = build_enabling_game(tree).game
    for c in components_of(tree):
        for x in c.samples():
            assert gps_map(g, x) == pytest.approx(x, abs=1e-9)
            z = flatten(gps_w(g, split(g, x)))
            assert np.linalg.norm(displacement(g, z)) < 1e-9
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = flatten(g.random_profile(rng))
        fixed = np.linalg.norm(gps_map(g, x) - x) < 1e-9
        assert fixed == bool(is_equilibrium(g, split(g, x)))


def test_displacement_jacobian_matches_differences():
    rng = np.random.default_rng(1)
    checked = 0
    for name in catalog.NAMES:
        g = build_enabling_game(catalog.load_tree(name)).game
        for _ in range(40):
            x = flatten(g.random_profile(rng))
            z = x + rng.normal(scale=2.0, size=x.size)
            try:
                J = gps_displacement_jacobian(g, z, margin=1e-3)
            except OnCellBoundary:
                continue
            fd = central_jacobian(lambda v: displacement(g, v), z)
            assert J == pytest.approx(fd, abs=1e-5)
            checked += 1
    assert checked > 40


def test_certificate_at_strict_equilibrium():
    # strictly dominant strategies: identity Jacobian at the unique equilibrium
    A = np.array([[3.0, 2.0], [1.0, 0.0]])
    g = bimatrix(A, A.T.copy())
    pieces = enumerate_equilibria(g)
    assert len(pieces) == 1
    z = flatten(gps_w(g, split(g, pieces[0].vertices[0])))
    sign, det, margin = jacobian_certificate(g, z)
    assert sign == 1 and det == pytest.approx(1.0) and margin > 0


def test_three_player_generic_odd_count():
    rng = np.random.default_rng(5)
    polys = [simplex(2)] * 3
    for _ in range(3):
        g = PolytopeGame.from_multilinear(polys, rng.normal(size=(3, 2, 2, 2)))
        pieces = enumerate_equilibria(g, seed=0)
        assert len(pieces) % 2 == 1
        for p in pieces:
            assert is_equilibrium(g, split(g, p.vertices[0]), tol=1e-7)


def test_one_player_game():
    g = PolytopeGame.from_multilinear([simplex(3)], np.array([[1.0, 3.0, 2.0]]))
    pieces = enumerate_equilibria(g)
    assert len(pieces) == 1 and pieces[0].vertices[0] == pytest.approx([0, 1, 0])


def test_clustering_joins_touching_pieces():
    g = build_enabling_game(catalog.load_tree("beerquiche")).game
    pieces = enumerate_equilibria(g)
    comps = cluster_components(pieces)
    assert len(pieces) > len(comps) == 2
    assert comps[0].gap_to(comps[1]) > 0.5
    assert commuted_gps_map(g, flatten(g.random_profile(np.random.default_rng(0)))).shape == (8,)
