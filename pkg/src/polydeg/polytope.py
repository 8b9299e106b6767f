"""Small convex polytopes given by vertices.

The H-representation, face lattice and nearest-point projection are all
computed by exhaustive enumeration, which is exact and fast enough for the
handful of vertices that strategy polytopes of small games have.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_POINTS = 64
MAX_DIM = 8
MAX_FACETS = 16
TOL = 1e-9
CELL_MARGIN = 1e-8


class GuardExceeded(ValueError):
    pass


class OnCellBoundary(ArithmeticError):
    """The projected point sits too close to a boundary of its normal-fan cell."""


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def compose(self, inner: AffineMap) -> AffineMap:
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.offset + self.offset)

    def homogeneous(self) -> np.ndarray:
        k_out, k_in = self.matrix.shape
        h = np.zeros((k_out + 1, k_in + 1))
        h[:k_out, :k_in] = self.matrix
        h[:k_out, k_in] = self.offset
        h[k_out, k_in] = 1.0
        return h

    @staticmethod
    def identity(k: int) -> AffineMap:
        return AffineMap(np.eye(k), np.zeros(k))


def _orth_basis(vectors: np.ndarray, k: int, tol: float) -> np.ndarray:
    """Orthonormal basis (k x r) of the span of the rows of ``vectors``."""
    if vectors.size == 0:
        return np.zeros((k, 0))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    r = int(np.sum(s > tol))
    basis = vt[:r].T
    # fix signs so the basis is reproducible
    for j in range(r):
        i = np.argmax(np.abs(basis[:, j]))
        if basis[i, j] < 0:
            basis[:, j] = -basis[:, j]
    return basis


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 500):
    """Point of minimal Euclidean norm in conv(points), via Wolfe's algorithm.

    Returns (x, weights) with x = weights @ points.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m = P.shape[0]
    scale = max(1.0, float(np.max(np.sum(P * P, axis=1))))
    S = [int(np.argmin(np.sum(P * P, axis=1)))]
    w = np.array([1.0])
    x = P[S[0]].copy()
    for _ in range(max_iter):
        j = int(np.argmin(P @ x))
        if x @ x - P[j] @ x <= tol * scale or j in S:
            break
        S.append(j)
        w = np.append(w, 0.0)
        while True:
            Q = P[S]
            n = len(S)
            M = np.zeros((n + 1, n + 1))
            M[:n, :n] = Q @ Q.T
            M[:n, n] = 1.0
            M[n, :n] = 1.0
            rhs = np.zeros(n + 1)
            rhs[n] = 1.0
            alpha = np.linalg.lstsq(M, rhs, rcond=None)[0][:n]
            if np.all(alpha > tol):
                w = alpha
                break
            mask = alpha <= tol
            denom = w[mask] - alpha[mask]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, w[mask] / denom, np.inf)
            theta = min(1.0, float(np.min(ratios))) if ratios.size else 1.0
            w = (1 - theta) * w + theta * alpha
            keep = w > tol
            if not np.any(keep):
                keep[int(np.argmax(w))] = True
            S = [s for s, kp in zip(S, keep) if kp]
            w = w[keep]
            w = w / w.sum()
            if len(S) == 1:
                break
        x = w @ P[S]
    weights = np.zeros(m)
    weights[S] = w
    return x, weights


def hull_distance(z, points) -> float:
    """Euclidean distance from z to conv(points)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x, _ = min_norm_point(P - np.asarray(z, dtype=float))
    return float(np.linalg.norm(x))


def hulls_distance(a, b) -> float:
    """Distance between two convex hulls (through their Minkowski difference)."""
    A = np.atleast_2d(np.asarray(a, dtype=float))
    B = np.atleast_2d(np.asarray(b, dtype=float))
    diff = (A[:, None, :] - B[None, :, :]).reshape(-1, A.shape[1])
    x, _ = min_norm_point(diff)
    return float(np.linalg.norm(x))


@dataclass(frozen=True)
class Face:
    vertex_ids: tuple[int, ...]
    points: np.ndarray
    base: np.ndarray
    basis: np.ndarray
    facet_ids: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project_affine(self, z: np.ndarray) -> np.ndarray:
        return self.base + self.basis @ (self.basis.T @ (z - self.base))

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


class Polytope:
    """conv(vertices) in R^k, with its affine hull and facet inequalities.

    Facets are stored as ambient inequalities ``normals @ x <= offsets`` whose
    normals lie in the direction space of the affine hull.
    """

    def __init__(self, vertices, base, basis, normals, offsets, facet_sets):
        self.vertices = vertices
        self.base = base
        self.basis = basis
        self.normals = normals
        self.offsets = offsets
        self.facet_sets = facet_sets

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def barycenter(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.vertices))) if self.vertices.size else 1.0)

    def __repr__(self):
        return f"Polytope(k={self.ambient_dim}, dim={self.dim}, vertices={self.n_vertices})"

    # -- membership ------------------------------------------------------
    def to_hull(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.base + self.basis @ (self.basis.T @ (z - self.base))

    def slacks(self, x) -> np.ndarray:
        return self.offsets - self.normals @ np.asarray(x, dtype=float)

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x - self.to_hull(x)) > tol * self.scale:
            return False
        return bool(np.all(self.slacks(x) >= -tol * self.scale))

    def sample(self, rng: np.random.Generator, count: int | None = None):
        """Random points: Dirichlet-weighted combinations of the vertices."""
        m = self.n_vertices
        if count is None:
            return rng.dirichlet(np.ones(m)) @ self.vertices
        return rng.dirichlet(np.ones(m), size=count) @ self.vertices

    # -- faces ---------------------------------------------------------------
    @cached_property
    def _face_list(self) -> list[Face]:
        m = self.n_vertices
        full = frozenset(range(m))
        sets = {full}
        frontier = {frozenset(f) for f in self.facet_sets}
        sets |= frontier
        facet_list = [frozenset(f) for f in self.facet_sets]
        while frontier:
            new = set()
            for s in frontier:
                for f in facet_list:
                    t = s & f
                    if t and t not in sets:
                        new.add(t)
            sets |= new
            frontier = new
        faces = []
        for s in sets:
            ids = tuple(sorted(s))
            pts = self.vertices[list(ids)]
            base = pts.mean(axis=0)
            basis = _orth_basis(pts - base, self.ambient_dim, 1e-9 * self.scale)
            fids = tuple(j for j, f in enumerate(facet_list) if s <= f)
            faces.append(Face(ids, pts, base, basis, fids))
        faces.sort(key=lambda f: (f.dim, f.vertex_ids))
        return faces

    def faces(self) -> list[Face]:
        return list(self._face_list)

    @cached_property
    def _face_by_ids(self) -> dict[tuple[int, ...], Face]:
        return {f.vertex_ids: f for f in self._face_list}

    def face_of(self, x, tol: float = TOL) -> Face:
        """Smallest face containing x (x assumed in P)."""
        sl = self.slacks(x)
        active = np.flatnonzero(sl <= tol * self.scale)
        ids = set(range(self.n_vertices))
        for j in active:
            ids &= set(self.facet_sets[j])
        key = tuple(sorted(ids))
        if key in self._face_by_ids:
            return self._face_by_ids[key]
        # numerically ambiguous: fall back to the smallest face holding x
        best = None
        for f in self._face_list:
            if np.linalg.norm(f.project_affine(x) - x) <= 1e3 * tol * self.scale:
                if best is None or f.dim < best.dim:
                    best = f
        return best if best is not None else self._face_list[-1]

    def normal_cone_contains(self, face: Face, d, tol: float = TOL) -> bool:
        """d in N(face): every vertex of the face maximizes x -> d.x over P."""
        vals = self.vertices @ np.asarray(d, dtype=float)
        top = vals[list(face.vertex_ids)]
        return bool(np.min(top) >= np.max(vals) - tol * max(1.0, np.max(np.abs(vals))))

    # -- projection --------------------------------------------------------
    def nearest_point(self, z) -> tuple[np.ndarray, Face]:
        zp = self.to_hull(z)
        if self.dim == 0:
            return self.vertices[0].copy(), self._face_list[0]
        if np.all(self.slacks(zp) >= 0):
            return zp, self.face_of(zp)
        best = None
        best_viol = np.inf
        for f in self._face_list[:-1]:
            x = f.project_affine(zp)
            viol = max(0.0, -float(np.min(self.slacks(x))),
                       float(np.max((self.vertices - x) @ (zp - x))))
            if viol < best_viol:
                best, best_viol = x, viol
                if viol <= 1e-14 * self.scale**2:
                    break
        face = self.face_of(best)
        return face.project_affine(zp), face

    def project(self, z) -> np.ndarray:
        return self.nearest_point(z)[0]

    def cell_margin(self, z, x=None, face=None) -> float:
        """Distance-like margin of z from the boundary of its projection cell.

        Minimum of (a) the distance of r(z) to the relative boundary of its face
        and (b) the depth of z - r(z) inside the relative interior of the
        normal cone of that face.
        """
        zp = self.to_hull(z)
        if x is None:
            x, face = self.nearest_point(zp)
        margin = np.inf
        P = face.projector()
        sl = self.slacks(x)
        for j, (a, s) in enumerate(zip(self.normals, sl)):
            if j in face.facet_ids:
                continue
            pa = np.linalg.norm(P @ a)
            if pa > 1e-12:
                margin = min(margin, s / pa)
        d = zp - x
        inside = set(face.vertex_ids)
        Q = np.eye(self.ambient_dim) - P
        for i, v in enumerate(self.vertices):
            if i in inside:
                continue
            u = Q @ (v - x)
            nu = np.linalg.norm(u)
            if nu > 1e-12:
                margin = min(margin, -(d @ u) / nu)
        return float(margin)

    def projection_jacobian(self, z, margin: float = CELL_MARGIN) -> np.ndarray:
        x, face = self.nearest_point(z)
        if self.cell_margin(z, x, face) < margin:
            raise OnCellBoundary(f"cell margin below {margin:g}")
        return face.projector()

    # -- constructions -------------------------------------------------------
    def shrink(self, eps: float) -> Polytope:
        """Homothety toward the vertex barycenter moving no vertex by more than eps."""
        c = self.barycenter
        radius = float(np.max(np.linalg.norm(self.vertices - c, axis=1)))
        if radius == 0.0:
            return self
        lam = min(1.0, eps / radius)
        return self.homothety(lam, c)

    def homothety(self, lam: float, center) -> Polytope:
        c = np.asarray(center, dtype=float)
        verts = (1 - lam) * self.vertices + lam * c
        offsets = (1 - lam) * self.offsets + lam * (self.normals @ c)
        base = (1 - lam) * self.base + lam * c
        return Polytope(verts, base, self.basis, self.normals, offsets, self.facet_sets)

    def affine_image(self, amap: AffineMap) -> Polytope:
        """Image under an affine map that is injective on the affine hull."""
        return from_vertices([amap(v) for v in self.vertices])


def from_vertices(points, tol: float = TOL) -> Polytope:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    if pts.shape[0] > MAX_POINTS:
        raise GuardExceeded(f"{pts.shape[0]} points exceeds the cap of {MAX_POINTS}")
    k = pts.shape[1]
    scale = max(1.0, float(np.max(np.abs(pts))) if pts.size else 1.0)
    uniq = []
    for p in pts:
        if all(np.linalg.norm(p - q) > tol * scale for q in uniq):
            uniq.append(p)
    pts = np.array(uniq).reshape(len(uniq), k)
    c = pts.mean(axis=0)
    basis = _orth_basis(pts - c, k, tol * scale)
    dim = basis.shape[1]
    if dim > MAX_DIM:
        raise GuardExceeded(f"intrinsic dimension {dim} exceeds the cap of {MAX_DIM}")
    # extreme points only
    keep = list(range(len(pts)))
    if dim > 0:
        for i in range(len(pts)):
            others = [j for j in keep if j != i]
            if others and hull_distance(pts[i], pts[others]) <= tol * scale:
                keep.remove(i)
    verts = pts[keep]
    base = verts.mean(axis=0)
    normals, offsets, fsets = _facets(verts, base, basis, tol * scale)
    return Polytope(verts, base, basis, normals, offsets, fsets)


def _facets(verts, base, basis, tol):
    m, k = verts.shape
    dim = basis.shape[1]
    if dim == 0:
        return np.zeros((0, k)), np.zeros(0), []
    U = (verts - base) @ basis
    found: dict[tuple[int, ...], tuple[np.ndarray, float]] = {}
    if math.comb(m, dim) <= 200_000:
        for sub in itertools.combinations(range(m), dim):
            D = U[list(sub[1:])] - U[sub[0]]
            if dim == 1:
                a = np.ones(1)
            else:
                _, s, vt = np.linalg.svd(D)
                if s[-1] <= tol or len(s) < dim - 1:
                    continue
                a = vt[-1]
            _try_facet(U, a, U[sub[0]], tol, found)
    else:
        from scipy.spatial import ConvexHull

        for eq in ConvexHull(U).equations:
            _try_facet(U, eq[:-1], None, tol, found, offset=-eq[-1])
    if len(found) > 2 ** 12:
        raise GuardExceeded("too many facets")
    normals, offsets, fsets = [], [], []
    for ids in sorted(found):
        a, b = found[ids]
        n_amb = basis @ a
        normals.append(n_amb)
        offsets.append(b + n_amb @ base)
        fsets.append(ids)
    return np.array(normals), np.array(offsets), fsets


def _try_facet(U, a, point, tol, found, offset=None):
    a = a / np.linalg.norm(a)
    b = a @ point if offset is None else offset / 1.0
    vals = U @ a - b
    if np.all(vals <= tol):
        pass
    elif np.all(vals >= -tol):
        a, b, vals = -a, -b, -vals
    else:
        return
    ids = tuple(np.flatnonzero(vals >= -tol).tolist())
    if len(ids) >= U.shape[1] and ids not in found:
        found[ids] = (a, b)


def simplex(d: int) -> Polytope:
    """Unit simplex conv(e_1..e_d) in R^d."""
    return from_vertices(np.eye(d))


def product(*polys: Polytope) -> Polytope:
    pts = [np.concatenate(c) for c in itertools.product(*(p.vertices for p in polys))]
    return from_vertices(pts)


def sum_zero_basis(d: int) -> np.ndarray:
    """Orthonormal basis (d x (d-1)) of {x : sum(x) = 0}, Helmert construction."""
    Q = np.zeros((d, max(d - 1, 0)))
    for j in range(1, d):
        Q[:j, j - 1] = 1.0
        Q[j, j - 1] = -j
        Q[:, j - 1] /= math.sqrt(j * (j + 1))
    return Q


@dataclass(frozen=True)
class Standardization:
    polytope: Polytope
    embed: AffineMap
    unembed: AffineMap


def standardize(p: Polytope, rotation: np.ndarray | None = None) -> Standardization:
    """Embed p affinely into the hyperplane {sum x = 1} of R^(dim+1), full-dimensionally."""
    d = p.dim + 1
    Q = sum_zero_basis(d)
    R = np.eye(p.dim) if rotation is None else np.asarray(rotation, dtype=float)
    c = np.full(d, 1.0 / d)
    A = Q @ R @ p.basis.T
    embed = AffineMap(A, c - A @ p.base)
    B = p.basis @ R.T @ Q.T
    unembed = AffineMap(B, p.base - B @ c)
    verts = np.array([embed(v) for v in p.vertices])
    normals = p.normals @ p.basis @ R.T @ Q.T
    offsets = p.offsets - p.normals @ p.base + normals @ c
    ps = Polytope(verts, verts.mean(axis=0), Q @ R, normals, offsets, p.facet_sets)
    return Standardization(ps, embed, unembed)


def is_standard(p: Polytope, tol: float = 1e-12) -> bool:
    d = p.ambient_dim
    return p.dim == d - 1 and bool(np.all(np.abs(p.vertices.sum(axis=1) - 1) <= tol))


def shrink_hausdorff(p: Polytope, q: Polytope) -> float:
    """Hausdorff distance between p and an inner polytope q (max over p's vertices)."""
    return max(hull_distance(v, q.vertices) for v in p.vertices)
