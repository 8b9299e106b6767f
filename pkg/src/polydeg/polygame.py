"""Polytope-form games with multiaffine payoffs.

Payoffs are stored as one homogeneous coefficient tensor ``H`` of shape
``(N, k_1 + 1, ..., k_N + 1)``: player n's payoff at x is H[n] contracted
with the lifted vectors (x_m, 1). The trailing slot of each mode is the
constant term. For standard games (polytopes full-dimensional in the
hyperplane sum(x) = 1) the constant slots are kept at zero, so the tensor
restricted to the first d_m slots is the unique multilinear extension.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .polytope import AffineMap, Polytope, from_vertices, is_standard, standardize

PAYOFF_TOL = 1e-8


class ReductionError(ValueError):
    pass


def lift(x) -> np.ndarray:
    return np.append(np.asarray(x, dtype=float), 1.0)


def _contract(T: np.ndarray, vecs: list, keep: tuple[int, ...]) -> np.ndarray:
    """Contract modes not in ``keep``; T has one leading axis before the modes."""
    for m in reversed(range(len(vecs))):
        if m in keep:
            continue
        T = np.tensordot(T, vecs[m], axes=([1 + m], [0]))
        # axes after m shift left by one, which is fine because we go in reverse
    return T


def _mode_product(T: np.ndarray, mode: int, M: np.ndarray) -> np.ndarray:
    """T'[.., j, ..] = sum_i T[.., i, ..] M[i, j] on axis 1 + mode."""
    out = np.tensordot(T, M, axes=([1 + mode], [0]))
    return np.moveaxis(out, -1, 1 + mode)


class PolytopeGame:
    def __init__(self, polytopes: list[Polytope], tensor: np.ndarray, labels=None, standard: bool = False):
        self.polytopes = list(polytopes)
        self.tensor = np.asarray(tensor, dtype=float)
        expected = (len(self.polytopes),) + tuple(p.ambient_dim + 1 for p in self.polytopes)
        if self.tensor.shape != expected:
            raise ValueError(f"payoff tensor shape {self.tensor.shape}, expected {expected}")
        self.labels = labels
        self.standard = standard

    @classmethod
    def from_multilinear(cls, polytopes, table, labels=None) -> PolytopeGame:
        """Standard game from a multilinear tensor of shape (N, d_1, ..., d_N)."""
        table = np.asarray(table, dtype=float)
        H = np.zeros((table.shape[0],) + tuple(s + 1 for s in table.shape[1:]))
        H[(slice(None),) + tuple(slice(0, s) for s in table.shape[1:])] = table
        standard = all(is_standard(p) for p in polytopes)
        return cls(polytopes, H, labels=labels, standard=standard)

    @property
    def n_players(self) -> int:
        return len(self.polytopes)

    @property
    def sizes(self) -> list[int]:
        return [p.ambient_dim for p in self.polytopes]

    def scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.tensor))) if self.tensor.size else 1.0

    def multilinear(self) -> np.ndarray:
        """Tensor of shape (N, k_1, ..., k_N) valid on the hyperplanes sum(x_m) = 1."""
        T = self.tensor
        for m, k in enumerate(self.sizes):
            M = np.vstack([np.eye(k), np.ones((1, k))])
            T = _mode_product(T, m, M)
        return T

    # -- evaluation ----------------------------------------------------------
    def check_profile(self, profile, tol: float = 1e-9) -> None:
        for n, (p, x) in enumerate(zip(self.polytopes, profile)):
            if not p.contains(x, tol):
                raise ValueError(f"player {n + 1} point lies outside its polytope")

    def payoff(self, profile, check: bool = False) -> np.ndarray:
        if check:
            self.check_profile(profile)
        vecs = [lift(x) for x in profile]
        return _contract(self.tensor, vecs, ())

    def gradient(self, n: int, profile) -> np.ndarray:
        """Linear coefficient vector of player n's payoff in x_n (opponents fixed)."""
        vecs = [lift(x) for x in profile]
        g = _contract(self.tensor[n:n + 1], vecs, (n,))[0]
        return g[:-1]

    def payoff_gradient(self, n: int, profile) -> np.ndarray:
        if not self.standard:
            raise ValueError("payoff_gradient needs a standard game")
        return self.gradient(n, profile)

    def constant_term(self, n: int, profile) -> float:
        vecs = [lift(x) for x in profile]
        return float(_contract(self.tensor[n:n + 1], vecs, (n,))[0][-1])

    def coupling(self, n: int, m: int, profile) -> np.ndarray:
        """d gradient_n / d x_m, a (k_n x k_m) matrix."""
        vecs = [lift(x) for x in profile]
        M = _contract(self.tensor[n:n + 1], vecs, tuple(sorted((n, m))))[0]
        if n > m:
            M = M.T
        return M[:-1, :-1]

    # -- derived games ---------------------------------------------------------
    def with_bonus(self, bonus) -> PolytopeGame:
        """Add x_n . bonus_n to player n's payoff."""
        H = self.tensor.copy()
        for n, b in enumerate(bonus):
            idx = [n] + [k for k in self.sizes]
            idx[1 + n] = slice(0, self.sizes[n])
            H[tuple(idx)] += np.asarray(b, dtype=float)
        return PolytopeGame(self.polytopes, H, self.labels, self.standard)

    def with_polytopes(self, polytopes) -> PolytopeGame:
        return PolytopeGame(polytopes, self.tensor, self.labels, all(is_standard(p) for p in polytopes))

    def pullback(self, maps: list[AffineMap], polytopes: list[Polytope], standard=None) -> PolytopeGame:
        """Game on ``polytopes`` with payoff V(j_1(y_1), ..., j_N(y_N))."""
        H = self.tensor
        for m, j in enumerate(maps):
            H = _mode_product(H, m, j.homogeneous())
        if standard is None:
            standard = all(is_standard(p) for p in polytopes)
        return PolytopeGame(polytopes, H, None, standard)

    def vertex_table(self) -> np.ndarray:
        """Payoffs at all vertex tuples, shape (N, |V_1|, ..., |V_N|)."""
        T = self.tensor
        for m, p in enumerate(self.polytopes):
            Vh = np.hstack([p.vertices, np.ones((p.n_vertices, 1))])
            T = _mode_product(T, m, Vh.T)
        return T

    def random_profile(self, rng):
        return [p.sample(rng) for p in self.polytopes]


# -- equilibrium test -----------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumCheck:
    ok: bool
    worst_violation: float
    worst_player: int

    def __bool__(self):
        return self.ok


def is_equilibrium(game: PolytopeGame, profile, tol: float = PAYOFF_TOL) -> EquilibriumCheck:
    worst, who = -np.inf, -1
    for n, p in enumerate(game.polytopes):
        g = game.gradient(n, profile)
        gain = float(np.max(p.vertices @ g) - np.asarray(profile[n]) @ g)
        if gain > worst:
            worst, who = gain, n
    return EquilibriumCheck(worst <= tol, worst, who)


# -- decomposition into zero-mean part and bonus ------------------------------------

@dataclass
class PayoffDecomposition:
    zero_mean: PolytopeGame
    bonus: list[np.ndarray]

    def reconstruct(self) -> PolytopeGame:
        return self.zero_mean.with_bonus(self.bonus)


def decompose(game: PolytopeGame) -> PayoffDecomposition:
    if not game.standard:
        raise ValueError("decompose needs a standard game")
    center = [p.barycenter for p in game.polytopes]
    bonus = [game.gradient(n, center) for n in range(game.n_players)]
    return PayoffDecomposition(game.with_bonus([-b for b in bonus]), bonus)


# -- reductions ---------------------------------------------------------------------

@dataclass
class ReductionMap:
    """Per player an affine surjection q_n onto ``targets[n]`` and a right inverse j_n."""

    maps: list[AffineMap]
    sections: list[AffineMap]
    targets: list[Polytope]

    def __call__(self, profile):
        return [q(x) for q, x in zip(self.maps, profile)]

    def lift_back(self, profile):
        return [j(y) for j, y in zip(self.sections, profile)]

    @staticmethod
    def identity(game: PolytopeGame) -> ReductionMap:
        ids = [AffineMap.identity(k) for k in game.sizes]
        return ReductionMap(ids, ids, list(game.polytopes))


def section_for(q: AffineMap, source: Polytope) -> AffineMap:
    """Least-squares affine right inverse of q, landing in the affine hull of source."""
    B = source.basis
    A = q.matrix @ B
    pinv = np.linalg.pinv(A)
    M = B @ pinv
    return AffineMap(M, source.base - M @ q(source.base))


def apply_reduction(game: PolytopeGame, red: ReductionMap, samples: int = 50, seed: int = 0,
                    tol: float = PAYOFF_TOL) -> PolytopeGame:
    reduced = game.pullback(red.sections, red.targets)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        prof = game.random_profile(rng)
        err = np.max(np.abs(reduced.payoff(red(prof)) - game.payoff(prof)))
        if err > tol * game.scale():
            raise ReductionError(f"payoffs differ by {err:.3g} on a fiber of the map")
    return reduced


def maximal_reduction(game: PolytopeGame, rank_tol: float = 1e-9):
    """Quotient each player's polytope by payoff-equivalence of its points."""
    maps, sections, targets = [], [], []
    vertex_lists = [p.vertices for p in game.polytopes]
    for n, p in enumerate(game.polytopes):
        rows = []
        others = [range(q.n_vertices) for m, q in enumerate(game.polytopes) if m != n]
        for combo in itertools.product(*others):
            prof = []
            it = iter(combo)
            for m in range(game.n_players):
                prof.append(p.base if m == n else vertex_lists[m][next(it)])
            for m in range(game.n_players):
                # gradient of player m's payoff along x_n
                if m == n:
                    rows.append(game.gradient(n, prof))
                else:
                    vecs = [lift(x) for x in prof]
                    c = _contract(game.tensor[m:m + 1], vecs, (n,))[0][:-1]
                    rows.append(c)
        R = np.array(rows) @ p.basis if p.dim else np.zeros((len(rows), 0))
        if R.size:
            _, s, vt = np.linalg.svd(R, full_matrices=False)
            smax = s[0] if s.size else 0.0
            r = int(np.sum(s > rank_tol * smax)) if smax > 0 else 0
            if np.any((s > rank_tol * smax) & (s < 10 * rank_tol * smax)):
                warnings.warn(f"player {n + 1}: rank decision close to threshold", stacklevel=2)
            W = vt[:r].T
        else:
            W = np.zeros((p.dim, 0))
        q = AffineMap(W.T @ p.basis.T, -W.T @ p.basis.T @ p.base)
        j = AffineMap(p.basis @ W, p.base.copy())
        maps.append(q)
        sections.append(j)
        targets.append(from_vertices([q(v) for v in p.vertices]))
    red = ReductionMap(maps, sections, targets)
    return apply_reduction(game, red), red


# -- standardization ----------------------------------------------------------------

@dataclass
class StandardForm:
    game: PolytopeGame
    embeds: list[AffineMap]
    unembeds: list[AffineMap]

    def to_standard(self, profile):
        return [e(x) for e, x in zip(self.embeds, profile)]

    def from_standard(self, profile):
        return [e(y) for e, y in zip(self.unembeds, profile)]


def standardize_game(game: PolytopeGame, rotations=None, check: int = 100, seed: int = 0) -> StandardForm:
    stds = [standardize(p, None if rotations is None else rotations[n]) for n, p in enumerate(game.polytopes)]
    T = game.tensor
    for m, st in enumerate(stds):
        A, b = st.unembed.matrix, st.unembed.offset
        d = A.shape[1]
        M = np.vstack([A + np.outer(b, np.ones(d)), np.ones((1, d))])
        T = _mode_product(T, m, M)
    polys = [st.polytope for st in stds]
    sgame = PolytopeGame.from_multilinear(polys, T)
    sgame.standard = True
    form = StandardForm(sgame, [s.embed for s in stds], [s.unembed for s in stds])
    rng = np.random.default_rng(seed)
    for _ in range(check):
        prof = game.random_profile(rng)
        err = np.max(np.abs(sgame.payoff(form.to_standard(prof)) - game.payoff(prof)))
        if err > 1e-8 * game.scale():
            raise ArithmeticError(f"standardization round trip off by {err:.3g}")
    return form
