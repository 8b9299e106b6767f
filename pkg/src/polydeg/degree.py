"""Degrees of equilibrium components, computed three ways.

All three methods follow the same recipe. Perturb the game by a small random
bonus, find every equilibrium of the perturbed game, and add up the signs of
the Jacobian determinants of the displacement map at the solutions that lie
near the component.

* ``pf_degree`` works on any polytope-form game after standardization
  (bonus added in standard coordinates).
* ``km_degree`` is the same computation on a normal form, whose simplices are
  already standard.
* ``gw_degree`` restricts the enabling form to shrunken polytopes C^eps,
  perturbs through terminal payoffs (bonuses attached to last actions), and
  repeats for eps -> 0 until the sum stops changing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    NEIGHBORHOOD,
    EquilibriumComponent,
    cluster_components,
    enumerate_equilibria,
    flatten,
    gps_w,
    jacobian_certificate,
    split,
)
from .game_tree import GameTree, build_normal_form
from .polygame import PolytopeGame, StandardForm, decompose, standardize_game
from .polytope import AffineMap, shrink_hausdorff
from .sequence_form import (
    EnablingGame,
    behavioral_shrink,
    build_enabling_game,
    mixed_to_enabling,
    terminal_game_tensor,
)

DET_MIN = 1e-8
MARGIN_MIN = 1e-8
BOUNDARY_BAND = 1e-6
MAX_ATTEMPTS = 20
MAX_LEVELS = 20
BOUNDARY = "solution on the neighborhood boundary"


class Inconclusive(RuntimeError):
    pass


class NeighborhoodInvalid(ValueError):
    pass


@dataclass
class Solution:
    point: np.ndarray
    sign: int
    det: float
    margin: float
    inside: bool


@dataclass
class DegreeReport:
    method: str
    component: str
    degree: int
    solutions: list[Solution] = field(default_factory=list)
    perturbation: np.ndarray | None = None
    delta: float = 0.0
    seed: int = 0
    attempts: int = 1
    eps_schedule: list[tuple[int, float, int]] = field(default_factory=list)
    det_min: float = np.inf
    margin_min: float = np.inf
    total_count: int = 0
    total_sum: int = 0
    rejections: list[str] = field(default_factory=list)

    @property
    def inside(self) -> list[Solution]:
        return [s for s in self.solutions if s.inside]


def ball_sample(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    if dim == 0:
        return np.zeros(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1.0 / dim) * v


def default_delta(game_or_payoffs) -> float:
    if isinstance(game_or_payoffs, PolytopeGame):
        top = float(np.max(np.abs(game_or_payoffs.tensor))) if game_or_payoffs.tensor.size else 0.0
    else:
        top = float(np.max(np.abs(game_or_payoffs)))
    return 1e-4 * (1.0 + top)


# -- neighborhoods ---------------------------------------------------------------------

def resolve_component(game: PolytopeGame, component: EquilibriumComponent, to_component=None,
                      rho_u: float | None = None) -> EquilibriumComponent:
    """Match ``component`` to a full cluster of the unperturbed game and check isolation."""
    rho_u = component.rho_u if rho_u is None else rho_u
    pieces = enumerate_equilibria(game)
    clusters = cluster_components(pieces, rho=component.rho, coords=to_component)
    near = [c for c in clusters if c.gap_to(component) < rho_u]
    if not near:
        raise NeighborhoodInvalid(f"no equilibria within {rho_u:g} of component {component.ident}")
    if len(near) > 1:
        raise NeighborhoodInvalid(f"neighborhood of {component.ident} meets {len(near)} components")
    target = near[0]
    for c in clusters:
        if c is not target and c.gap_to(target) <= rho_u + BOUNDARY_BAND:
            raise NeighborhoodInvalid(f"closure of the neighborhood of {component.ident} meets another component")
    return EquilibriumComponent(component.ident, target.pieces, component.rho, rho_u, component.label)


def _solutions(game: PolytopeGame, to_component, target: EquilibriumComponent, to_point=None):
    """Signed solutions of a perturbed game, or a rejection reason."""
    pieces = enumerate_equilibria(game)
    if any(p.continuum for p in pieces):
        return None, "continuum of solutions"
    sols = []
    for p in pieces:
        y = p.vertices[0]
        z = flatten(gps_w(game, split(game, y)))
        sign, det, margin = jacobian_certificate(game, z)
        if abs(det) < DET_MIN:
            return None, f"determinant {det:.3g} below {DET_MIN:g}"
        if margin < MARGIN_MIN:
            return None, f"cell margin {margin:.3g} below {MARGIN_MIN:g}"
        x = y if to_point is None else to_point(y)
        c = x if to_component is None else to_component(x)
        dist = target.distance(c)
        if abs(dist - target.rho_u) <= BOUNDARY_BAND:
            return None, BOUNDARY
        sols.append(Solution(c, sign, det, margin, dist < target.rho_u))
    if not sols:
        return None, "no solutions found"
    return sols, ""


def _adjust_radius(target: EquilibriumComponent, rejections: list[str], start: float) -> None:
    """Repeated boundary hits come from geometry, not the perturbation: any isolating
    radius is admissible, so pull the radius in a little."""
    recent = rejections[-3:]
    if len(recent) == 3 and all(r.endswith(BOUNDARY) for r in recent) and target.rho_u > 0.5 * start:
        target.rho_u *= 0.9
        rejections.append(f"neighborhood radius reduced to {target.rho_u:.6g}")


def _finish(report: DegreeReport, sols: list[Solution]) -> DegreeReport:
    report.solutions = sols
    report.degree = int(sum(s.sign for s in sols if s.inside))
    report.total_count = len(sols)
    report.total_sum = int(sum(s.sign for s in sols))
    report.det_min = min(abs(s.det) for s in sols)
    report.margin_min = min(s.margin for s in sols)
    return report


# -- polytope form -----------------------------------------------------------------------

def identity_form(game: PolytopeGame) -> StandardForm:
    ids = [AffineMap.identity(k) for k in game.sizes]
    return StandardForm(game, ids, ids)


def pf_degree(game: PolytopeGame, component: EquilibriumComponent, delta: float | None = None,
              seed: int = 0, rho_u: float | None = None, to_component=None, rotations=None,
              standardize: bool = True, validate: bool = True, method: str = "pf") -> DegreeReport:
    if standardize:
        form = standardize_game(game, rotations)
    else:
        if not game.standard:
            raise ValueError("game is not in standard form")
        form = identity_form(game)
    target = resolve_component(game, component, to_component, rho_u) if validate else component
    if rho_u is not None:
        target.rho_u = rho_u
    sgame = form.game
    dec = decompose(sgame)
    base = flatten(dec.bonus)
    delta = default_delta(game) if delta is None else delta
    rng = np.random.default_rng(seed)
    report = DegreeReport(method, component.ident, 0, delta=delta, seed=seed)
    start_radius = target.rho_u

    def to_point(y):
        return flatten(form.from_standard(split(sgame, y)))

    for attempt in range(MAX_ATTEMPTS):
        d = delta * 0.5 ** (attempt // 5)
        g = base + ball_sample(rng, base.size, d)
        perturbed = dec.zero_mean.with_bonus(split(sgame, g))
        sols, why = _solutions(perturbed, to_component, target, to_point)
        if sols is None:
            report.rejections.append(why)
            _adjust_radius(target, report.rejections, start_radius)
            continue
        report.perturbation = g
        report.delta = d
        report.attempts = attempt + 1
        return _finish(report, sols)
    raise Inconclusive(f"{method} degree of {component.ident}: no admissible perturbation "
                       f"in {MAX_ATTEMPTS} attempts ({report.rejections[-1]})")


def enabling_coordinates(tree: GameTree, indices=None):
    """Flat mixed profile -> flat enabling profile."""
    eg = build_enabling_game(tree, indices)
    sizes = [len(ix.strategies) for ix in eg.indices]

    def convert(flat):
        out, k = [], 0
        for ix, s in zip(eg.indices, sizes):
            out.append(mixed_to_enabling(ix, flat[k:k + s]))
            k += s
        return np.concatenate(out)

    return convert


def km_degree(source, component: EquilibriumComponent, delta: float | None = None, seed: int = 0,
              rho_u: float | None = None, coords: str = "mixed", validate: bool = True) -> DegreeReport:
    """Degree in the normal form. With a tree and coords="enabling" the component is
    given in enabling coordinates and solutions are compared through the
    mixed-to-enabling map."""
    if isinstance(source, GameTree):
        game = build_normal_form(source)
        to_component = enabling_coordinates(source) if coords == "enabling" else None
    else:
        game = source
        to_component = None
    return pf_degree(game, component, delta, seed, rho_u, to_component, standardize=False,
                     validate=validate, method="km")


# -- terminal payoffs and the eps-restricted enabling form ----------------------------------

@dataclass
class TerminalDecomposition:
    residual: np.ndarray          # (N, |Z|), DFS terminal order
    bonus: list[np.ndarray]       # per player, one entry per last action

    def payoffs(self, indices, bonus=None) -> np.ndarray:
        bonus = self.bonus if bonus is None else bonus
        return self.residual + bonus_matrix(indices, bonus, self.residual.shape[1])


def bonus_matrix(indices, bonus, n_terminals: int) -> np.ndarray:
    tree = indices[0].tree
    zs = tree.terminal_ids()
    out = np.zeros((len(indices), n_terminals))
    for n, ix in enumerate(indices):
        for col, z in enumerate(zs):
            j = ix.last_of[z]
            if j is not None:
                out[n, col] = bonus[n][j]
    return out


def terminal_decompose(tree: GameTree, indices=None, payoffs=None) -> TerminalDecomposition:
    if indices is None:
        indices = build_enabling_game(tree).indices
    G = tree.payoff_matrix() if payoffs is None else np.asarray(payoffs, dtype=float)
    zs = tree.terminal_ids()
    col = {z: k for k, z in enumerate(zs)}
    bonus = []
    for n, ix in enumerate(indices):
        g = np.array([np.mean([G[n, col[z]] for z in ix.fiber(i)]) for i in range(len(ix.last))])
        bonus.append(g)
    residual = G - bonus_matrix(indices, bonus, len(zs))
    return TerminalDecomposition(residual, bonus)


def inradius_proxy(polys) -> float:
    vals = []
    for p in polys:
        if p.dim == 0:
            continue
        vals.append(float(np.min(p.slacks(p.barycenter))))
    return min(vals) if vals else 1.0


def restricted_polytopes(eg: EnablingGame, eps: float, family: str = "homothety"):
    if family == "homothety":
        return [p.shrink(eps) for p in eg.polytopes]
    if family == "behavioral":
        out = []
        for ix, p in zip(eg.indices, eg.polytopes):
            if p.dim == 0:
                out.append(p)
                continue
            floor = eps
            q = behavioral_shrink(ix, floor)
            while shrink_hausdorff(p, q) > eps:
                floor /= 1.5
                q = behavioral_shrink(ix, floor)
            out.append(q)
        return out
    raise ValueError(f"unknown shrink family {family!r}")


def gw_degree(tree: GameTree, component: EquilibriumComponent, delta: float | None = None,
              eps0: float | None = None, seed: int = 0, rho_u: float | None = None,
              family: str = "homothety", validate: bool = True, max_levels: int = MAX_LEVELS) -> DegreeReport:
    eg = build_enabling_game(tree)
    target = resolve_component(eg.game, component, None, rho_u) if validate else component
    if rho_u is not None:
        target.rho_u = rho_u
    dec = terminal_decompose(tree, eg.indices)
    delta = default_delta(tree.payoff_matrix()) if delta is None else delta
    if eps0 is None:
        # restricted equilibria drift about sqrt(N) * eps from the component, so the
        # first level must already sit well inside the neighborhood
        eps0 = 0.1 * min(inradius_proxy(eg.polytopes), target.rho_u)
    sizes = [len(ix.last) for ix in eg.indices]
    base = np.concatenate(dec.bonus) if sizes else np.zeros(0)
    rng = np.random.default_rng(seed)
    report = DegreeReport("gw", component.ident, 0, delta=delta, seed=seed)
    start_radius = target.rho_u
    previous = None
    for k in range(max_levels + 1):
        eps = eps0 * 2.0 ** (-k)
        polys = restricted_polytopes(eg, eps, family)
        for attempt in range(MAX_ATTEMPTS):
            d = delta * 0.5 ** (attempt // 5)
            g = base + ball_sample(rng, base.size, d)
            parts = np.split(g, np.cumsum(sizes)[:-1])
            H = terminal_game_tensor(tree, eg.indices, dec.payoffs(eg.indices, parts))
            sols, why = _solutions(PolytopeGame(polys, H), None, target)
            if sols is not None:
                break
            report.rejections.append(f"eps level {k}: {why}")
            _adjust_radius(target, report.rejections, start_radius)
        else:
            raise Inconclusive(f"gw degree of {component.ident}: no admissible perturbation at eps level {k}")
        level = int(sum(s.sign for s in sols if s.inside))
        report.eps_schedule.append((k, eps, level))
        report.attempts += attempt
        _finish(report, sols)
        report.perturbation = g
        report.delta = d
        if previous is not None and level == previous:
            report.degree = level
            return report
        previous = level
    raise Inconclusive(f"gw degree of {component.ident}: eps sums did not stabilize "
                       f"({[s for _, _, s in report.eps_schedule]})")


# -- the +1 law ---------------------------------------------------------------------------

@dataclass
class TotalDegreeReport:
    method: str
    components: list[EquilibriumComponent]
    reports: list[DegreeReport]

    @property
    def total(self) -> int:
        return sum(r.degree for r in self.reports)


def components_of(source, rho_u: float = NEIGHBORHOOD) -> list[EquilibriumComponent]:
    """Equilibrium components (enabling coordinates for trees) with safe neighborhood radii."""
    game = build_enabling_game(source).game if isinstance(source, GameTree) else source
    comps = cluster_components(enumerate_equilibria(game))
    for c in comps:
        others = [c.gap_to(o) for o in comps if o is not c]
        c.rho_u = min([rho_u] + [0.45 * g for g in others])
    return comps


def component_degree(source, comp: EquilibriumComponent, method: str, seed: int = 0, **kw) -> DegreeReport:
    if method == "gw":
        return gw_degree(source, comp, seed=seed, **kw)
    if method == "km":
        if isinstance(source, GameTree):
            return km_degree(source, comp, seed=seed, coords="enabling", **kw)
        return km_degree(source, comp, seed=seed, **kw)
    if method == "pf":
        game = build_enabling_game(source).game if isinstance(source, GameTree) else source
        return pf_degree(game, comp, seed=seed, **kw)
    raise ValueError(f"unknown method {method!r}")


def total_degree_check(source, method: str = "pf", seed: int = 0, **kw) -> TotalDegreeReport:
    comps = components_of(source)
    reports = [component_degree(source, c, method, seed, **kw) for c in comps]
    return TotalDegreeReport(method, comps, reports)
