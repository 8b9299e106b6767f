import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from oracles import central_jacobian, qp_projection
from polydeg.polytope import (
    AffineMap,
    GuardExceeded,
    OnCellBoundary,
    from_vertices,
    hull_distance,
    hulls_distance,
    min_norm_point,
    product,
    shrink_hausdorff,
    simplex,
    standardize,
    is_standard,
    sum_zero_basis,
)

SQUARE = from_vertices([[0, 0], [1, 0], [0, 1], [1, 1]])


def test_square_faces_and_facets():
    assert SQUARE.dim == 2 and SQUARE.n_vertices == 4
    assert len(SQUARE.normals) == 4
    assert len(SQUARE.faces()) == 9
    assert SQUARE.contains([0.5, 0.5]) and not SQUARE.contains([1.1, 0.5])


def test_interior_points_dropped():
    tri = from_vertices([[0, 0], [2, 0], [0, 2], [0.5, 0.5]])
    assert tri.n_vertices == 3
    assert len(tri.faces()) == 7


def test_lower_dimensional_polytope():
    seg = from_vertices([[0, 0, 1], [1, 1, 1]])
    assert seg.dim == 1 and seg.ambient_dim == 3
    x = seg.project([1, 0, 0])
    assert x == pytest.approx([0.5, 0.5, 1])
    point = from_vertices([[2.0, 3.0]])
    assert point.dim == 0
    assert point.project([9, 9]) == pytest.approx([2, 3])


def test_simplex_and_product():
    s = simplex(3)
    assert s.dim == 2 and s.n_vertices == 3
    cube = product(simplex(2), simplex(2))
    assert cube.n_vertices == 4 and cube.dim == 2


def test_nearest_point_examples():
    x, face = SQUARE.nearest_point([2, -1])
    assert x == pytest.approx([1, 0])
    assert face.dim == 0
    x, face = SQUARE.nearest_point([0.5, 3])
    assert x == pytest.approx([0.5, 1]) and face.dim == 1
    x, face = SQUARE.nearest_point([0.3, 0.6])
    assert x == pytest.approx([0.3, 0.6]) and face.dim == 2


def test_projection_jacobian_on_edge():
    J = SQUARE.projection_jacobian([0.5, 3])
    assert J == pytest.approx(np.array([[1, 0], [0, 0]]))
    with pytest.raises(OnCellBoundary):
        SQUARE.projection_jacobian([1, 2])


def test_cell_margin():
    assert SQUARE.cell_margin([0.5, 0.5]) == pytest.approx(0.5)
    assert SQUARE.cell_margin([0.5, 1.25]) == pytest.approx(0.25)
    assert SQUARE.cell_margin([1.5, 1.25]) == pytest.approx(0.25)


def test_min_norm_point():
    x, lam = min_norm_point(np.array([[1.0, -1.0], [1.0, 1.0]]))
    assert lam == pytest.approx([0.5, 0.5])
    assert x == pytest.approx([1, 0])
    assert hull_distance([0, 0], np.array([[1.0, -1.0], [1.0, 1.0]])) == pytest.approx(1)
    a = np.array([[0.0, 0.0], [0.0, 1.0]])
    b = np.array([[2.0, 0.5], [3.0, 0.5]])
    assert hulls_distance(a, b) == pytest.approx(2)


def test_facets_match_qhull():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pts = rng.normal(size=(9, 3))
        p = from_vertices(pts)
        hull = ConvexHull(pts)
        assert sorted(p.vertices.tolist()) == sorted(pts[hull.vertices].tolist())
        for x in rng.normal(size=(50, 3)):
            inside = np.all(hull.equations[:, :3] @ x + hull.equations[:, 3] <= 1e-12)
            assert p.contains(x) == inside


def test_standardize_round_trip():
    p = from_vertices([[0, 0], [2, 0], [0, 1], [2, 1]])
    s = standardize(p)
    assert is_standard(s.polytope)
    rng = np.random.default_rng(0)
    for x in p.sample(rng, 20):
        assert s.unembed(s.embed(x)) == pytest.approx(x)
    assert s.polytope.ambient_dim == 3
    assert np.allclose(s.polytope.vertices.sum(axis=1), 1.0)


def test_sum_zero_basis_orthonormal():
    B = sum_zero_basis(5)
    assert B.T @ B == pytest.approx(np.eye(4))
    assert np.abs(B.sum(axis=0)).max() < 1e-12


def test_shrink_hausdorff():
    small = SQUARE.shrink(0.1)
    assert shrink_hausdorff(SQUARE, small) <= 0.1 + 1e-12
    assert all(SQUARE.contains(v) for v in small.vertices)
    assert small.contains(SQUARE.barycenter)


def test_affine_image():
    amap = AffineMap(np.array([[2.0, 0], [0, 1]]), np.array([1.0, 0]))
    img = SQUARE.affine_image(amap)
    assert img.contains([3, 1]) and not img.contains([0.5, 0.5])


def test_point_guard():
    with pytest.raises(GuardExceeded):
        from_vertices(np.random.default_rng(0).normal(size=(80, 2)))


def random_polytope(rng):
    k = int(rng.integers(1, 5))
    m = int(rng.integers(1, 9))
    pts = rng.normal(size=(m, k))
    if rng.random() < 0.3 and k > 1:
        # flatten into a random hyperplane
        a = rng.normal(size=k)
        pts -= np.outer(pts @ a, a) / (a @ a)
    return from_vertices(pts)


def test_projection_against_qp_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = random_polytope(rng)
        z = 2 * rng.normal(size=p.ambient_dim)
        assert p.project(z) == pytest.approx(qp_projection(p.vertices, z), abs=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_projection_variational_inequality(seed):
    rng = np.random.default_rng(seed)
    p = random_polytope(rng)
    z = 3 * rng.normal(size=p.ambient_dim)
    x = p.project(z)
    assert p.contains(x, tol=1e-9)
    assert np.max((p.vertices - x) @ (z - x)) <= 1e-9 * p.scale
    assert np.linalg.norm(p.project(x) - x) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_projection_jacobian_matches_differences(seed):
    rng = np.random.default_rng(seed)
    p = random_polytope(rng)
    z = 2 * rng.normal(size=p.ambient_dim)
    if p.cell_margin(z) < 1e-3:
        return
    J = p.projection_jacobian(z)
    assert J == pytest.approx(central_jacobian(p.project, z), abs=1e-5)


def test_face_lattice_euler_characteristic():
    # f-vector of a polytope satisfies f0 - f1 + f2 - ... = 1 - (-1)^d for d >= 1
    rng = np.random.default_rng(11)
    for _ in range(10):
        p = from_vertices(rng.normal(size=(8, 3)))
        counts = [0] * (p.dim + 1)
        for f in p.faces():
            counts[f.dim] += 1
        chi = sum((-1) ** d * c for d, c in enumerate(counts[:-1]))
        assert chi == 1 - (-1) ** p.dim


def test_cube_face_count():
    cube = from_vertices(list(itertools.product([0, 1], repeat=3)))
    assert len(cube.faces()) == 8 + 12 + 6 + 1
