import numpy as np
import pytest

from polydeg import catalog
from polydeg.game_tree import build_normal_form
from polydeg.polygame import (
    PolytopeGame,
    ReductionError,
    ReductionMap,
    apply_reduction,
    decompose,
    is_equilibrium,
    maximal_reduction,
    standardize_game,
)
from polydeg.polytope import AffineMap, from_vertices, simplex
from polydeg.sequence_form import build_enabling_game


def bimatrix(A, B):
    A, B = np.asarray(A, float), np.asarray(B, float)
    return PolytopeGame.from_multilinear([simplex(A.shape[0]), simplex(A.shape[1])], np.stack([A, B]))


PENNIES = bimatrix([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])


def test_payoff_is_bilinear_expectation():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    g = bimatrix(A, B)
    assert g.standard
    for _ in range(20):
        x, y = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
        assert g.payoff([x, y]) == pytest.approx([x @ A @ y, x @ B @ y])
        assert g.gradient(0, [x, y]) == pytest.approx(A @ y)
        assert g.gradient(1, [x, y]) == pytest.approx(B.T @ x)


def test_coupling_is_derivative_of_gradient():
    rng = np.random.default_rng(1)
    g = build_enabling_game(catalog.load_tree("fig1")).game
    prof = g.random_profile(rng)
    C = g.coupling(0, 1, prof)
    h = 1e-6
    for k in range(g.sizes[1]):
        up = [prof[0], prof[1].copy()]
        dn = [prof[0], prof[1].copy()]
        up[1][k] += h
        dn[1][k] -= h
        fd = (g.gradient(0, up) - g.gradient(0, dn)) / (2 * h)
        assert C[:, k] == pytest.approx(fd, abs=1e-7)


def test_vertex_table_matches_payoffs():
    g = build_enabling_game(catalog.load_tree("beerquiche")).game
    T = g.vertex_table()
    P, Q = g.polytopes
    for i, v in enumerate(P.vertices):
        for j, w in enumerate(Q.vertices):
            assert T[:, i, j] == pytest.approx(g.payoff([v, w]))


def test_is_equilibrium_pennies():
    assert is_equilibrium(PENNIES, [np.array([0.5, 0.5]), np.array([0.5, 0.5])])
    bad = is_equilibrium(PENNIES, [np.array([1.0, 0.0]), np.array([1.0, 0.0])])
    assert not bad and bad.worst_player == 1 and bad.worst_violation == pytest.approx(2.0)


def test_decompose_and_reconstruct():
    rng = np.random.default_rng(2)
    g = bimatrix(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
    dec = decompose(g)
    center = [p.barycenter for p in g.polytopes]
    for n in range(2):
        assert dec.zero_mean.gradient(n, center) == pytest.approx(np.zeros(3), abs=1e-12)
    back = dec.reconstruct()
    for _ in range(10):
        prof = g.random_profile(rng)
        assert back.payoff(prof) == pytest.approx(g.payoff(prof))


def test_standardize_game_preserves_payoffs():
    g = build_enabling_game(catalog.load_tree("fig1")).game
    form = standardize_game(g)
    rng = np.random.default_rng(3)
    for _ in range(30):
        prof = g.random_profile(rng)
        y = form.to_standard(prof)
        assert form.game.payoff(y) == pytest.approx(g.payoff(prof), abs=1e-10)
        back = form.from_standard(y)
        for a, b in zip(back, prof):
            assert a == pytest.approx(b, abs=1e-12)


def test_standardize_with_rotation():
    g = build_enabling_game(catalog.load_tree("gy1")).game
    rng = np.random.default_rng(4)
    rots = []
    for p in g.polytopes:
        q, _ = np.linalg.qr(rng.normal(size=(p.dim, p.dim)))
        rots.append(q)
    form = standardize_game(g, rots)
    prof = g.random_profile(rng)
    assert form.game.payoff(form.to_standard(prof)) == pytest.approx(g.payoff(prof))


def test_maximal_reduction_of_normal_form():
    # fig1 normal form: LL1 and LR1 are payoff-equivalent for everyone
    nf = build_normal_form(catalog.load_tree("fig1"))
    reduced, red = maximal_reduction(nf)
    assert [p.dim for p in reduced.polytopes] == [2, 2]
    rng = np.random.default_rng(5)
    for _ in range(20):
        prof = nf.random_profile(rng)
        assert reduced.payoff(red(prof)) == pytest.approx(nf.payoff(prof), abs=1e-9)


def test_maximal_reduction_agrees_across_forms():
    tree = catalog.load_tree("fig1")
    a, _ = maximal_reduction(build_normal_form(tree))
    b, _ = maximal_reduction(build_enabling_game(tree).game)
    assert [p.dim for p in a.polytopes] == [p.dim for p in b.polytopes]
    assert [p.n_vertices for p in a.polytopes] == [p.n_vertices for p in b.polytopes]


def test_invalid_reduction_rejected():
    rng = np.random.default_rng(6)
    g = bimatrix(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
    # collapse the first two rows: they are not equivalent in a generic game
    q = AffineMap(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), np.zeros(2))
    target = from_vertices([[1, 0], [0, 1]])
    j = AffineMap(np.array([[0.5, 0.0], [0.5, 0.0], [0.0, 1.0]]), np.zeros(3))
    ident = AffineMap.identity(3)
    red = ReductionMap([q, ident], [j, ident], [target, g.polytopes[1]])
    with pytest.raises(ReductionError):
        apply_reduction(g, red)


def test_shape_check():
    with pytest.raises(ValueError):
        PolytopeGame([simplex(2)], np.zeros((1, 2)))
