"""Equilibrium enumeration over face tuples, GPS maps, and clustering.

An equilibrium puts each player on a face F_n of their polytope such that the
payoff gradient is orthogonal to F_n and no vertex outside F_n does better.
With two players those conditions are linear in the opponent's point, so every
face tuple is solved exactly; the solution set on a tuple is a polytope and we
keep its vertices. Three or more players fall back to multistart Newton.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .polygame import PolytopeGame, is_equilibrium
from .polytope import CELL_MARGIN, Face, OnCellBoundary, hull_distance, hulls_distance

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-7
CLUSTER_GAP = 1e-3
NEIGHBORHOOD = 0.05
MAX_FACES = 128


def flatten(profile) -> np.ndarray:
    return np.concatenate([np.asarray(x, dtype=float) for x in profile])


def split(game: PolytopeGame, flat) -> list[np.ndarray]:
    flat = np.asarray(flat, dtype=float)
    out, k = [], 0
    for s in game.sizes:
        out.append(flat[k:k + s])
        k += s
    return out


@dataclass
class EquilibriumPiece:
    """Convex set of equilibria, stored by its vertices (flat profiles)."""

    vertices: np.ndarray
    faces: tuple = ()

    @property
    def continuum(self) -> bool:
        return self.vertices.shape[0] > 1

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def samples(self) -> np.ndarray:
        if self.continuum:
            return np.vstack([self.vertices, self.centroid])
        return self.vertices


# -- polytope vertex enumeration in a small parameter space --------------------------

def _polytope_vertices(G: np.ndarray, h: np.ndarray, tol: float):
    """Vertices of the bounded set {v : G v <= h}; None if empty."""
    q = G.shape[1]
    norms = np.linalg.norm(G, axis=1)
    flat = norms <= 1e-12
    if np.any(h[flat] < -tol):
        return None
    G, h, norms = G[~flat], h[~flat], norms[~flat]
    if q == 0:
        return [np.zeros(0)]
    G = G / norms[:, None]
    h = h / norms
    found = []
    for rows in itertools.combinations(range(G.shape[0]), q):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        v = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ v <= h + tol) and all(np.linalg.norm(v - w) > 1e-9 for w in found):
            found.append(v)
    return found or None


def _solve_side(F_own: Face, F_oth: Face, P_own, P_oth, Mat, vec, tol):
    """Points y of F_oth making F_own optimal against the gradient Mat y + vec."""
    D, E = F_own.basis, F_oth.basis
    c_oth, c_own = F_oth.base, F_own.base
    lhs = D.T @ Mat @ E
    rhs = -D.T @ (Mat @ c_oth + vec)
    if E.shape[1] == 0:
        if np.linalg.norm(rhs) > tol:
            return None
        y0, N = c_oth, np.zeros((c_oth.size, 0))
    else:
        if lhs.shape[0]:
            mu, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
            if np.linalg.norm(lhs @ mu - rhs) > tol:
                return None
            _, s, vt = np.linalg.svd(lhs)
            rank = int(np.sum(s > 1e-9 * max(1.0, s[0] if s.size else 1.0)))
            null = vt[rank:].T
        else:
            mu = np.zeros(E.shape[1])
            null = np.eye(E.shape[1])
        y0 = c_oth + E @ mu
        N = E @ null
    diffs = P_own.vertices - c_own
    G = np.vstack([P_oth.normals @ N, diffs @ Mat @ N]) if N.shape[1] else np.zeros((0, 0))
    h = np.concatenate([P_oth.offsets - P_oth.normals @ y0, -diffs @ (Mat @ y0 + vec)])
    if N.shape[1] == 0:
        G = np.zeros((h.size, 0))
    verts = _polytope_vertices(G, h, tol)
    if verts is None:
        return None
    return [y0 + N @ v for v in verts]


def _enumerate_two(game: PolytopeGame, tol: float):
    P1, P2 = game.polytopes
    k1, k2 = game.sizes
    H = game.tensor
    A, a = H[0][:k1, :k2], H[0][:k1, k2]
    B, b = H[1][:k1, :k2].T, H[1][k1, :k2]
    pieces = []
    for F1 in P1.faces():
        for F2 in P2.faces():
            ys = _solve_side(F1, F2, P1, P2, A, a, tol)
            if ys is None:
                continue
            xs = _solve_side(F2, F1, P2, P1, B, b, tol)
            if xs is None:
                continue
            if len(xs) == 1 and len(ys) == 1:
                if P1.face_of(xs[0]).vertex_ids != F1.vertex_ids or P2.face_of(ys[0]).vertex_ids != F2.vertex_ids:
                    continue
            verts = np.array([np.concatenate([x, y]) for x in xs for y in ys])
            pieces.append(EquilibriumPiece(verts, (F1.vertex_ids, F2.vertex_ids)))
    return pieces


def _enumerate_one(game: PolytopeGame, tol: float):
    P = game.polytopes[0]
    g = game.gradient(0, [P.base])
    vals = P.vertices @ g
    best = P.vertices[vals >= vals.max() - tol]
    return [EquilibriumPiece(best.copy(), ())]


def _newton_tuple(game: PolytopeGame, faces: list[Face], rng, starts: int, tol: float):
    N = game.n_players
    dims = [f.dim for f in faces]
    offs = np.cumsum([0] + dims)
    scale = game.scale()

    def point(mu):
        return [f.base + f.basis @ mu[offs[n]:offs[n + 1]] for n, f in enumerate(faces)]

    def residual(mu):
        x = point(mu)
        return np.concatenate([faces[n].basis.T @ game.gradient(n, x) for n in range(N)])

    def jac(mu):
        x = point(mu)
        J = np.zeros((offs[-1], offs[-1]))
        for n in range(N):
            for m in range(N):
                if m != n and dims[n] and dims[m]:
                    C = game.coupling(n, m, x)
                    J[offs[n]:offs[n + 1], offs[m]:offs[m + 1]] = faces[n].basis.T @ C @ faces[m].basis
        return J

    inits = [np.zeros(offs[-1])]
    for _ in range(starts):
        mu = []
        for f in faces:
            y = rng.dirichlet(np.ones(len(f.vertex_ids))) @ f.points
            mu.append(f.basis.T @ (y - f.base))
        inits.append(np.concatenate(mu) if mu else np.zeros(0))
    roots = []
    for mu in inits:
        if offs[-1] == 0:
            roots.append(mu)
            break
        r = residual(mu)
        nr = np.linalg.norm(r)
        for _ in range(200):
            if nr <= 1e-11 * scale:
                break
            step = np.linalg.lstsq(jac(mu), -r, rcond=None)[0]
            t = 1.0
            while t > 1e-6:
                cand = mu + t * step
                rc = residual(cand)
                if np.linalg.norm(rc) < nr:
                    mu, r, nr = cand, rc, np.linalg.norm(rc)
                    break
                t *= 0.5
            else:
                break
        if nr <= 1e-9 * scale:
            if all(np.linalg.norm(mu - w) > DEDUP_TOL for w in roots):
                roots.append(mu)
        else:
            log.debug("newton did not converge on face tuple %s", [f.vertex_ids for f in faces])
    out = []
    for mu in roots:
        x = point(mu)
        if not all(p.contains(xi, 1e-9) for p, xi in zip(game.polytopes, x)):
            continue
        if not is_equilibrium(game, x, tol):
            continue
        if any(p.face_of(xi).vertex_ids != f.vertex_ids for p, xi, f in zip(game.polytopes, x, faces)):
            continue
        out.append(EquilibriumPiece(flatten(x)[None, :], tuple(f.vertex_ids for f in faces)))
    return out


def _dedup(pieces):
    kept = []
    for p in pieces:
        dup = False
        for q in kept:
            if p.vertices.shape == q.vertices.shape:
                d = np.max(np.min(np.linalg.norm(p.vertices[:, None] - q.vertices[None], axis=2), axis=1))
                if d <= DEDUP_TOL:
                    dup = True
                    break
        if not dup:
            kept.append(p)
    return kept


def enumerate_equilibria(game: PolytopeGame, tol: float | None = None, seed: int = 0,
                         region=None, newton_starts: int = 8) -> list[EquilibriumPiece]:
    """All equilibria, as convex pieces. ``region`` optionally filters by a predicate."""
    if tol is None:
        tol = 1e-9 * game.scale()
    for p in game.polytopes:
        if len(p.faces()) > MAX_FACES:
            raise ValueError(f"polytope with {len(p.faces())} faces exceeds the guard of {MAX_FACES}")
    N = game.n_players
    if N == 1:
        pieces = _enumerate_one(game, tol)
    elif N == 2:
        pieces = _enumerate_two(game, tol)
    elif N == 3:
        rng = np.random.default_rng(seed)
        pieces = []
        for faces in itertools.product(*(p.faces() for p in game.polytopes)):
            pieces.extend(_newton_tuple(game, list(faces), rng, newton_starts, tol))
    else:
        raise ValueError("enumeration supports at most three players")
    pieces = _dedup(pieces)
    if region is not None:
        pieces = [p for p in pieces if any(region(s) for s in p.samples())]
    pieces.sort(key=lambda p: tuple(np.round(p.vertices[0], 9)))
    return pieces


# -- components -----------------------------------------------------------------------

@dataclass
class EquilibriumComponent:
    ident: str
    pieces: list[np.ndarray]
    rho: float = CLUSTER_GAP
    rho_u: float = NEIGHBORHOOD
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def continuum(self) -> bool:
        return any(p.shape[0] > 1 for p in self.pieces)

    def points(self) -> np.ndarray:
        return np.vstack(self.pieces)

    def samples(self) -> np.ndarray:
        rows = [p for p in self.pieces] + [p.mean(axis=0)[None] for p in self.pieces if p.shape[0] > 1]
        return np.vstack(rows)

    @property
    def representative(self) -> np.ndarray:
        return self.pieces[0].mean(axis=0)

    def distance(self, x) -> float:
        return min(hull_distance(x, p) for p in self.pieces)

    def gap_to(self, other: EquilibriumComponent) -> float:
        return min(hulls_distance(p, q) for p in self.pieces for q in other.pieces)


def cluster_components(pieces: list[EquilibriumPiece], rho: float = CLUSTER_GAP, coords=None,
                       rho_u: float = NEIGHBORHOOD) -> list[EquilibriumComponent]:
    """Single-linkage clustering of convex pieces at gap rho."""
    if coords is None:
        verts = [p.vertices for p in pieces]
    else:
        verts = [np.array([coords(v) for v in p.vertices]) for p in pieces]
    n = len(verts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if find(i) == find(j):
                continue
            close = np.min(np.linalg.norm(verts[i][:, None] - verts[j][None], axis=2)) <= rho
            if close or hulls_distance(verts[i], verts[j]) <= rho:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    comps = []
    for ids in groups.values():
        comps.append([verts[i] for i in ids])
    comps.sort(key=lambda ps: tuple(np.round(np.vstack(ps).mean(axis=0), 9)))
    return [EquilibriumComponent(f"c{k}", ps, rho=rho, rho_u=rho_u) for k, ps in enumerate(comps)]


def separation(components: list[EquilibriumComponent]) -> float:
    """Smallest distance between two different components (inf if only one)."""
    best = np.inf
    for a, b in itertools.combinations(components, 2):
        best = min(best, a.gap_to(b))
    return best


# -- GPS maps ---------------------------------------------------------------------------

def gps_w(game: PolytopeGame, profile) -> list[np.ndarray]:
    return [np.asarray(profile[n], dtype=float) + game.gradient(n, profile) for n in range(game.n_players)]


def retract(game: PolytopeGame, profile) -> list[np.ndarray]:
    return [p.project(z) for p, z in zip(game.polytopes, profile)]


def gps_map(game: PolytopeGame, flat) -> np.ndarray:
    """Phi = r o w."""
    return flatten(retract(game, gps_w(game, split(game, flat))))


def commuted_gps_map(game: PolytopeGame, flat) -> np.ndarray:
    """Psi = w o r."""
    return flatten(gps_w(game, retract(game, split(game, flat))))


def displacement(game: PolytopeGame, flat) -> np.ndarray:
    return np.asarray(flat, dtype=float) - commuted_gps_map(game, flat)


def _jacobian_parts(game: PolytopeGame, z_profile):
    xs, faces, margins = [], [], []
    for p, z in zip(game.polytopes, z_profile):
        x, f = p.nearest_point(z)
        xs.append(x)
        faces.append(f)
        margins.append(p.cell_margin(z, x, f) if p.dim else np.inf)
    sizes = game.sizes
    offs = np.cumsum([0] + sizes)
    K = offs[-1]
    Dw = np.eye(K)
    Dr = np.zeros((K, K))
    for n in range(game.n_players):
        Dr[offs[n]:offs[n + 1], offs[n]:offs[n + 1]] = faces[n].projector() if sizes[n] else np.zeros((0, 0))
        for m in range(game.n_players):
            if m != n and sizes[n] and sizes[m]:
                Dw[offs[n]:offs[n + 1], offs[m]:offs[m + 1]] = game.coupling(n, m, xs)
    return np.eye(K) - Dw @ Dr, min(margins) if margins else np.inf, xs


def gps_displacement_jacobian(game: PolytopeGame, flat, margin: float = CELL_MARGIN) -> np.ndarray:
    J, m, _ = _jacobian_parts(game, split(game, flat))
    if m < margin:
        raise OnCellBoundary(f"cell margin {m:.3g} below {margin:g}")
    return J


def jacobian_certificate(game: PolytopeGame, flat):
    """(sign, det, cell margin) of the displacement at z, without raising."""
    J, m, _ = _jacobian_parts(game, split(game, flat))
    det = float(np.linalg.det(J)) if J.size else 1.0
    return (1 if det > 0 else -1), det, m
