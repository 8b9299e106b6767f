"""Command-line front end.

Every command prints a sectioned report. In ``--machine`` mode only the
``KEY value...`` lines are printed; human mode adds section headers and
indented notes around the same lines. Output is deterministic for a fixed
seed (``--seed``, else ``$POLYDEG_SEED``, else 0).

Exit codes: 0 success, 1 input error, 2 inconclusive, 3 expectation mismatch.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .degree import (
    Inconclusive,
    NeighborhoodInvalid,
    components_of,
    enabling_coordinates,
    gw_degree,
    km_degree,
    pf_degree,
)
from .equilibrium import NEIGHBORHOOD, EquilibriumComponent, cluster_components, enumerate_equilibria
from .game_tree import GameFileError, GameTree, PerfectRecallError, build_normal_form, parse_game
from .polygame import ReductionError, maximal_reduction
from .polytope import GuardExceeded
from .sequence_form import build_enabling_game, realization_polytope

EXIT_OK, EXIT_INPUT, EXIT_INCONCLUSIVE, EXIT_MISMATCH = 0, 1, 2, 3


class InputError(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


# -- formatting ----------------------------------------------------------------------

def num(x: float) -> str:
    x = float(x)
    if abs(x) < 5e-12:
        return "0"
    s = f"{x:.6g}"
    return "0" if s in ("-0", "0") else s


def nums(xs) -> str:
    return " ".join(num(x) for x in np.ravel(xs))


def signed(d: int) -> str:
    return "0" if d == 0 else f"{d:+d}"


class Report:
    def __init__(self, machine: bool):
        self.machine = machine
        self.lines: list[str] = []

    def section(self, name: str) -> None:
        if not self.machine:
            if self.lines:
                self.lines.append("")
            self.lines.append(f"== {name} ==")

    def key(self, key: str, *values) -> None:
        self.lines.append(" ".join([key] + [str(v) for v in values]))

    def note(self, text: str) -> None:
        if not self.machine:
            self.lines.append(f"  {text}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


# -- inputs ---------------------------------------------------------------------------

def load_game(spec: str) -> tuple[GameTree, str | None]:
    """A game file path, or the name of a bundled example."""
    path = Path(spec)
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise InputError("io", f"cannot read {spec}: {exc}") from None
        return parse_game(text), None
    if spec in catalog.NAMES:
        return catalog.load_tree(spec), spec
    raise InputError("io", f"no such game file: {spec}")


def parse_component_file(text: str):
    """Returns (id, points, radius or None, coords or None)."""
    ident, points, radius, coords = None, [], None, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "component" and len(rest) == 1:
                ident = rest[0]
            elif head == "point" and rest:
                points.append([float(t) for t in rest])
            elif head == "radius" and len(rest) == 1:
                radius = float(rest[0])
                if not radius > 0:
                    raise ValueError
            elif head == "coords" and len(rest) == 1 and rest[0] in ("mixed", "enabling"):
                coords = rest[0]
            else:
                raise ValueError
        except ValueError:
            raise InputError("component", f"line {lineno}: cannot parse {raw.strip()!r}") from None
    if ident is None:
        raise InputError("component", "missing 'component <id>' line")
    if not points:
        raise InputError("component", "no 'point' lines")
    if len({len(p) for p in points}) != 1:
        raise InputError("component", "points have different lengths")
    return ident, np.array(points), radius, coords


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("POLYDEG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError("config", f"POLYDEG_SEED must be an integer, got {env!r}") from None


def positive(kind: str):
    def check(text: str) -> float:
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{kind} must be a number") from None
        if not x > 0:
            raise argparse.ArgumentTypeError(f"{kind} must be positive")
        return x
    return check


# -- report sections -----------------------------------------------------------------------

def game_section(rep: Report, tree: GameTree, name: str | None) -> None:
    rep.section("GAME")
    if name:
        rep.note(f"bundled example {name}")
    rep.key("PLAYERS", tree.players)
    rep.key("NODES", len(tree.nodes))
    rep.key("TERMINALS", len(tree.terminals))
    for n in range(1, tree.players + 1):
        for u in tree.infosets(n):
            rep.key("INFOSET", n, u, *tree.infoset_actions(n, u))
    nature = sorted({v.infoset for v in tree.nodes.values() if v.player == 0})
    for u in nature:
        rep.key("INFOSET", 0, u)


def polytope_section(rep: Report, eg) -> None:
    rep.section("POLYTOPES")
    for n, (ix, poly) in enumerate(zip(eg.indices, eg.polytopes), 1):
        rep.key("PLAYER", n)
        rep.key("STRATEGIES", n, len(ix.strategies))
        rep.key("LAST", n, *ix.last_labels())
        rep.key("DIM", n, poly.dim)
        rep.note(f"player {n}: {poly.n_vertices} vertices in R^{poly.ambient_dim}")
        for v in poly.vertices:
            rep.key("VERTEX", n, nums(v))


def component_lines(rep: Report, comps) -> None:
    for c in comps:
        pts = np.unique(np.round(c.points(), 10), axis=0)
        rep.key("COMPONENT", c.label or c.ident, len(pts), "continuum" if c.continuum else "isolated")
        for p in pts:
            rep.key("EQ", c.label or c.ident, nums(p))


def degree_lines(rep: Report, report, label: str) -> None:
    rep.key("DEGREE", report.method, label, signed(report.degree))
    for s in report.inside:
        rep.key("SOLUTION", nums(s.point), f"sign={signed(s.sign)}")
    for k, eps, total in report.eps_schedule:
        rep.note(f"eps level {k}: eps={num(eps)}")
        rep.key("EPS", k, total)


def cert_lines(rep: Report, report, label: str) -> None:
    rep.note(f"{report.method} {label}: seed {report.seed}, delta {num(report.delta)}, "
             f"{report.total_count} solutions overall, {len(report.rejections)} rejected perturbations")
    rep.key("CERT", f"det_min={num(report.det_min)}", f"margin_min={num(report.margin_min)}")


# -- commands -------------------------------------------------------------------------

def cmd_parse(args, rep: Report) -> int:
    tree, name = load_game(args.game)
    game_section(rep, tree, name)
    for n, ix in enumerate(build_enabling_game(tree).indices, 1):
        rep.key("STRATEGIES", n, len(ix.strategies))
    rep.key("PERFECT_RECALL", "yes")
    return EXIT_OK


def cmd_enabling(args, rep: Report) -> int:
    tree, name = load_game(args.game)
    game_section(rep, tree, name)
    eg = build_enabling_game(tree)
    polytope_section(rep, eg)
    for n, ix in enumerate(eg.indices, 1):
        rp = realization_polytope(ix)
        rep.note(f"player {n}: {len(ix.sequences)} sequences, realization polytope dim {rp.polytope.dim}")
    return EXIT_OK


def _labelled(tree: GameTree, name: str | None, rho_u: float = NEIGHBORHOOD):
    comps = components_of(tree, rho_u)
    if name:
        catalog.label_components(comps, catalog.load(name).locators)
    return comps


def cmd_equilibria(args, rep: Report) -> int:
    tree, name = load_game(args.game)
    game_section(rep, tree, name)
    rep.section("COMPONENTS")
    if args.form == "enabling":
        comps = _labelled(tree, name)
        rep.note("enabling coordinates")
    elif args.form == "normal":
        game = build_normal_form(tree)
        comps = cluster_components(enumerate_equilibria(game, seed=args.seed))
        rep.note("mixed strategies, pure strategies in lexicographic order")
        for n, labels in enumerate(game.labels or [], 1):
            rep.key("PURE", n, *labels)
    else:
        reduced, _ = maximal_reduction(build_enabling_game(tree).game)
        comps = cluster_components(enumerate_equilibria(reduced, seed=args.seed))
        rep.note("coordinates of the maximal reduction")
        for n, p in enumerate(reduced.polytopes, 1):
            rep.key("DIM", n, p.dim)
    component_lines(rep, comps)
    return EXIT_OK


def _user_component(args, tree: GameTree, method: str):
    ident, points, radius, coords = parse_component_file(_read(args.component))
    eg = build_enabling_game(tree)
    width_enabling = sum(len(ix.last) for ix in eg.indices)
    width_mixed = sum(len(ix.strategies) for ix in eg.indices)
    if coords is None:
        coords = "enabling" if method != "km" or points.shape[1] == width_enabling else "mixed"
    if coords == "mixed" and method != "km":
        points = np.array([enabling_coordinates(tree)(p) for p in points]) if points.shape[1] == width_mixed \
            else points
        coords = "enabling"
    want = width_enabling if coords == "enabling" else width_mixed
    if points.shape[1] != want:
        raise InputError("component", f"points have {points.shape[1]} coordinates, expected {want} ({coords})")
    if radius is None:
        radius = args.rho_u
    if radius is None:
        # default radius: the automatic one of the nearest enumerated component
        comps = components_of(tree)
        to_e = enabling_coordinates(tree) if coords == "mixed" else (lambda p: p)
        probe = to_e(points[0])
        near = min(comps, key=lambda c: c.distance(probe))
        radius = near.rho_u
    comp = EquilibriumComponent(ident, [p[None, :] for p in points], rho_u=radius, label=ident)
    return comp, coords


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError("io", f"cannot read {path}: {exc}") from None


def run_degree(tree: GameTree, comp: EquilibriumComponent, method: str, seed: int, coords="enabling",
               delta=None, eps0=None, shrink="homothety"):
    if method == "pf":
        return pf_degree(build_enabling_game(tree).game, comp, delta, seed)
    if method == "km":
        return km_degree(tree, comp, delta, seed, coords=coords)
    return gw_degree(tree, comp, delta, eps0, seed, family=shrink)


def cmd_degree(args, rep: Report) -> int:
    tree, name = load_game(args.game)
    comp, coords = _user_component(args, tree, args.method)
    game_section(rep, tree, name)
    polytope_section(rep, build_enabling_game(tree))
    rep.section("COMPONENTS")
    rep.key("COMPONENT", comp.ident, len(comp.pieces), f"radius={num(comp.rho_u)}", coords)
    report = run_degree(tree, comp, args.method, args.seed, coords, args.delta, args.eps0, args.shrink)
    rep.section("DEGREES")
    degree_lines(rep, report, comp.ident)
    rep.section("CERTIFICATES")
    cert_lines(rep, report, comp.ident)
    return EXIT_OK


def cmd_check_plus_one(args, rep: Report) -> int:
    tree, name = load_game(args.game)
    game_section(rep, tree, name)
    comps = _labelled(tree, name)
    rep.section("COMPONENTS")
    component_lines(rep, comps)
    rep.section("DEGREES")
    reports = []
    for c in comps:
        r = run_degree(tree, c, args.method, args.seed, shrink=args.shrink)
        degree_lines(rep, r, c.label or c.ident)
        reports.append((c, r))
    total = sum(r.degree for _, r in reports)
    rep.key("TOTAL", args.method, signed(total))
    rep.section("CERTIFICATES")
    for c, r in reports:
        cert_lines(rep, r, c.label or c.ident)
    ok = total == 1
    rep.key("CHECK", "plus-one", "ok" if ok else "mismatch")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_examples(args, rep: Report) -> int:
    names = {"fig1": ["fig1"], "gw": ["gy1", "gy3"], "beerquiche": ["beerquiche"]}[args.name]
    failures = 0
    for nm in names:
        ex = catalog.load(nm)
        game_section(rep, ex.tree, nm)
        eg = build_enabling_game(ex.tree)
        polytope_section(rep, eg)
        comps = _labelled(ex.tree, nm)
        rep.section("COMPONENTS")
        component_lines(rep, comps)
        rep.section("DEGREES")
        reports = []
        for c in comps:
            label = c.label or c.ident
            got = {}
            for method in ("gw", "pf", "km"):
                r = run_degree(ex.tree, c, method, args.seed)
                degree_lines(rep, r, label)
                reports.append((label, r))
                got[method] = r.degree
            agree = len(set(got.values())) == 1
            want = ex.expected.get(label)
            match = agree and (want is None or got["gw"] == want)
            if not match:
                failures += 1
                rep.note(f"{label}: expected {want}, got {got}")
            rep.key("CHECK", nm, label, "ok" if match else "mismatch")
        total = sum(r.degree for lbl, r in reports if r.method == "gw")
        rep.key("TOTAL", "gw", signed(total))
        if total != 1:
            failures += 1
        rep.key("CHECK", nm, "plus-one", "ok" if total == 1 else "mismatch")
        if len(comps) != len(ex.expected) or any(not c.label for c in comps):
            failures += 1
            rep.key("CHECK", nm, "components", "mismatch")
        rep.section("CERTIFICATES")
        for label, r in reports:
            cert_lines(rep, r, label)
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polydeg", description="Degrees of equilibrium components.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--machine", action="store_true", help="print only KEY value lines")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default $POLYDEG_SEED or 0)")
    sub = p.add_subparsers(dest="command", required=True)

    for cmd, helptext in (("parse", "validate a game file"),
                          ("enabling", "print the enabling strategy polytopes")):
        s = sub.add_parser(cmd, parents=[common], help=helptext)
        s.add_argument("game", help="game file, or a bundled example name")

    s = sub.add_parser("equilibria", parents=[common], help="enumerate equilibrium components")
    s.add_argument("game")
    s.add_argument("--form", choices=("normal", "enabling", "reduced"), default="enabling")

    s = sub.add_parser("degree", parents=[common], help="degree of one component")
    s.add_argument("game")
    s.add_argument("--component", required=True, help="component file")
    s.add_argument("--method", choices=("pf", "km", "gw"), default="pf")
    s.add_argument("--delta", type=positive("delta"))
    s.add_argument("--eps0", type=positive("eps0"))
    s.add_argument("--rho-u", dest="rho_u", type=positive("rho-u"))
    s.add_argument("--shrink", choices=("homothety", "behavioral"), default="homothety")

    s = sub.add_parser("check-plus-one", parents=[common], help="check that component degrees sum to +1")
    s.add_argument("game")
    s.add_argument("--method", choices=("pf", "km", "gw"), default="pf")
    s.add_argument("--shrink", choices=("homothety", "behavioral"), default="homothety")

    s = sub.add_parser("examples", parents=[common], help="run a bundled example against its expected values")
    s.add_argument("name", choices=("fig1", "gw", "beerquiche"))
    return p


COMMANDS = {
    "parse": cmd_parse,
    "enabling": cmd_enabling,
    "equilibria": cmd_equilibria,
    "degree": cmd_degree,
    "check-plus-one": cmd_check_plus_one,
    "examples": cmd_examples,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    rep = Report(args.machine)
    try:
        args.seed = resolve_seed(args.seed)
        status = COMMANDS[args.command](args, rep)
    except GameFileError as exc:
        return _fail(rep, f"ERROR {exc.kind}: {exc.detail}", EXIT_INPUT)
    except PerfectRecallError as exc:
        return _fail(rep, f"ERROR perfect-recall: {exc}", EXIT_INPUT)
    except InputError as exc:
        return _fail(rep, f"ERROR {exc.kind}: {exc.detail}", EXIT_INPUT)
    except GuardExceeded as exc:
        return _fail(rep, f"ERROR size-guard: {exc}", EXIT_INPUT)
    except NeighborhoodInvalid as exc:
        return _fail(rep, f"ERROR neighborhood: {exc}", EXIT_INPUT)
    except ReductionError as exc:
        return _fail(rep, f"ERROR reduction: {exc}", EXIT_INPUT)
    except Inconclusive as exc:
        return _fail(rep, f"INCONCLUSIVE {exc}", EXIT_INCONCLUSIVE)
    sys.stdout.write(rep.text())
    return status


def _fail(rep: Report, line: str, code: int) -> int:
    print(line, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
