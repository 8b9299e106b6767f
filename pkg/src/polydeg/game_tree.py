"""Extensive-form game trees: file parser, structural validation, strategies.

Nature is player 0 and plays the fixed behavior given in the file. Players
1..N are strategic. Information set ids are scoped per player.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

NATURE = 0
PROB_TOL = 1e-12


class GameFileError(ValueError):
    """Input rejected. ``kind`` is a short error class used in CLI output."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


class PerfectRecallError(GameFileError):
    def __init__(self, detail: str):
        super().__init__("perfect-recall", detail)


@dataclass(frozen=True)
class Action:
    label: str
    child: str
    prob: float | None = None


@dataclass(frozen=True)
class DecisionNode:
    id: str
    player: int
    infoset: str
    actions: tuple[Action, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.actions)


@dataclass(frozen=True)
class PureStrategy:
    """One action per information set, ordered by information set id."""

    player: int
    choices: tuple[tuple[str, str], ...]

    @property
    def label(self) -> str:
        return "".join(a for _, a in self.choices)

    def action_at(self, infoset: str) -> str:
        for u, a in self.choices:
            if u == infoset:
                return a
        raise KeyError(infoset)


@dataclass(frozen=True)
class GameTree:
    players: int
    nodes: dict[str, DecisionNode]
    terminals: dict[str, tuple[float, ...]]
    root: str
    parent: dict[str, tuple[str, int]] = field(repr=False, compare=False)

    # -- structure queries -------------------------------------------------
    def infosets(self, n: int) -> list[str]:
        return sorted({v.infoset for v in self.nodes.values() if v.player == n})

    def infoset_actions(self, n: int, u: str) -> tuple[str, ...]:
        for v in self.nodes.values():
            if v.player == n and v.infoset == u:
                return tuple(sorted(v.labels()))
        raise KeyError((n, u))

    def infoset_nodes(self, n: int, u: str) -> list[str]:
        return sorted(k for k, v in self.nodes.items() if v.player == n and v.infoset == u)

    def path(self, node_id: str) -> list[tuple[DecisionNode, Action]]:
        """(decision node, action taken) pairs from the root down to ``node_id``."""
        steps = []
        cur = node_id
        while cur != self.root:
            par, k = self.parent[cur]
            pnode = self.nodes[par]
            steps.append((pnode, pnode.actions[k]))
            cur = par
        steps.reverse()
        return steps

    def own_sequence(self, node_id: str, n: int) -> tuple[tuple[str, str], ...]:
        """Player ``n``'s own (infoset, action) history on the way to ``node_id``."""
        return tuple((v.infoset, a.label) for v, a in self.path(node_id) if v.player == n)

    def terminal_ids(self) -> list[str]:
        """Terminals in depth-first order (children in file order)."""
        out = []
        stack = [self.root]
        while stack:
            cur = stack.pop()
            if cur in self.terminals:
                out.append(cur)
                continue
            for a in reversed(self.nodes[cur].actions):
                stack.append(a.child)
        return out

    def nature_weight(self, z: str) -> float:
        w = 1.0
        for v, a in self.path(z):
            if v.player == NATURE:
                w *= a.prob
        return w

    def payoff_matrix(self) -> np.ndarray:
        """Terminal payoffs as an array of shape (N, |Z|), terminals in DFS order."""
        zs = self.terminal_ids()
        return np.array([[self.terminals[z][n] for z in zs] for n in range(self.players)])

    def with_payoffs(self, payoffs: dict[str, tuple[float, ...]]) -> GameTree:
        terms = {z: tuple(float(x) for x in payoffs[z]) for z in self.terminals}
        return GameTree(self.players, self.nodes, terms, self.root, self.parent)


# -- parsing -----------------------------------------------------------------

def _float(tok: str, lineno: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise GameFileError("syntax", f"line {lineno}: expected a number, got {tok!r}") from None
    if not math.isfinite(x):
        raise GameFileError("syntax", f"line {lineno}: non-finite number {tok!r}")
    return x


def parse_game(text: str) -> GameTree:
    players = None
    root = None
    raw_nodes: dict[str, dict] = {}
    terminals: dict[str, tuple[float, ...]] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if head == "players":
            if len(toks) != 2 or players is not None:
                raise GameFileError("syntax", f"line {lineno}: malformed or repeated 'players'")
            try:
                players = int(toks[1])
            except ValueError:
                raise GameFileError("syntax", f"line {lineno}: player count must be an integer") from None
            if players < 1:
                raise GameFileError("syntax", f"line {lineno}: need at least one player")
        elif head == "node":
            if len(toks) != 6 or toks[2] != "player" or toks[4] != "infoset":
                raise GameFileError("syntax", f"line {lineno}: expected 'node <id> player <k> infoset <u>'")
            nid = toks[1]
            if nid in raw_nodes or nid in terminals:
                raise GameFileError("duplicate-id", f"line {lineno}: id {nid!r} defined twice")
            try:
                owner = int(toks[3])
            except ValueError:
                raise GameFileError("syntax", f"line {lineno}: player must be an integer") from None
            current = {"player": owner, "infoset": toks[5], "actions": [], "line": lineno}
            raw_nodes[nid] = current
        elif head == "action":
            if current is None:
                raise GameFileError("syntax", f"line {lineno}: 'action' outside a node block")
            if len(toks) == 4 and toks[2] == "->":
                label, prob, child = toks[1], None, toks[3]
            elif len(toks) == 6 and toks[2] == "prob" and toks[4] == "->":
                label, prob, child = toks[1], _float(toks[3], lineno), toks[5]
            else:
                raise GameFileError("syntax", f"line {lineno}: expected 'action <label> [prob <p>] -> <id>'")
            if any(a[0] == label for a in current["actions"]):
                raise GameFileError("duplicate-id", f"line {lineno}: action {label!r} repeated at node")
            current["actions"].append((label, prob, child, lineno))
        elif head == "terminal":
            if len(toks) < 3 or toks[2] != "payoffs":
                raise GameFileError("syntax", f"line {lineno}: expected 'terminal <id> payoffs <f1> ...'")
            tid = toks[1]
            if tid in raw_nodes or tid in terminals:
                raise GameFileError("duplicate-id", f"line {lineno}: id {tid!r} defined twice")
            terminals[tid] = tuple(_float(t, lineno) for t in toks[3:])
            current = None
        elif head == "root":
            if len(toks) != 2 or root is not None:
                raise GameFileError("syntax", f"line {lineno}: malformed or repeated 'root'")
            root = toks[1]
        else:
            raise GameFileError("syntax", f"line {lineno}: unknown keyword {head!r}")

    if players is None:
        raise GameFileError("syntax", "missing 'players' line")
    if root is None:
        raise GameFileError("syntax", "missing 'root' line")
    if root in terminals:
        raise GameFileError("degenerate", f"root {root!r} is a terminal; a decision node is required")
    if root not in raw_nodes:
        raise GameFileError("dangling-reference", f"root {root!r} is not defined")

    nodes = {}
    for nid, rec in raw_nodes.items():
        line = rec["line"]
        if not 0 <= rec["player"] <= players:
            raise GameFileError("syntax", f"line {line}: player {rec['player']} out of range 0..{players}")
        if not rec["actions"]:
            raise GameFileError("syntax", f"line {line}: node {nid!r} has no actions")
        acts = []
        for label, prob, child, aline in rec["actions"]:
            if rec["player"] == NATURE and prob is None:
                raise GameFileError("syntax", f"line {aline}: Nature action {label!r} needs a probability")
            if rec["player"] != NATURE and prob is not None:
                raise GameFileError("syntax", f"line {aline}: only Nature actions carry probabilities")
            if child not in raw_nodes and child not in terminals:
                raise GameFileError("dangling-reference", f"line {aline}: unknown target {child!r}")
            acts.append(Action(label, child, prob))
        if rec["player"] == NATURE:
            probs = [a.prob for a in acts]
            if min(probs) < 0 or abs(sum(probs) - 1.0) > PROB_TOL:
                raise GameFileError("nature-probability",
                                    f"line {line}: probabilities at node {nid!r} sum to {sum(probs)!r}")
        nodes[nid] = DecisionNode(nid, rec["player"], rec["infoset"], tuple(acts))

    for tid, pay in terminals.items():
        if len(pay) != players:
            raise GameFileError("syntax", f"terminal {tid!r} has {len(pay)} payoffs, expected {players}")

    parent: dict[str, tuple[str, int]] = {}
    for nid, v in nodes.items():
        for k, a in enumerate(v.actions):
            if a.child in parent:
                raise GameFileError("structure", f"{a.child!r} has more than one parent")
            parent[a.child] = (nid, k)
    if root in parent:
        raise GameFileError("structure", f"root {root!r} has a parent")
    for nid in list(nodes) + list(terminals):
        if nid != root and nid not in parent:
            raise GameFileError("structure", f"{nid!r} is unreachable from the root")

    tree = GameTree(players, nodes, terminals, root, parent)
    _check_infosets(tree)
    validate_perfect_recall(tree, raise_error=True)
    return tree


def read_game(path) -> GameTree:
    with open(path, encoding="utf-8") as fh:
        return parse_game(fh.read())


def _check_infosets(tree: GameTree) -> None:
    seen: dict[tuple[int, str], tuple[str, ...]] = {}
    for v in tree.nodes.values():
        if v.player == NATURE:
            continue
        key = (v.player, v.infoset)
        labels = tuple(sorted(v.labels()))
        if key in seen and seen[key] != labels:
            raise GameFileError("infoset", f"player {v.player} infoset {v.infoset!r} has inconsistent actions")
        seen[key] = labels


def validate_perfect_recall(tree: GameTree, raise_error: bool = False) -> str | None:
    """Return None if every information set has a unique own history, else a report."""
    for n in range(1, tree.players + 1):
        for u in tree.infosets(n):
            seqs = {tree.own_sequence(v, n) for v in tree.infoset_nodes(n, u)}
            if len(seqs) > 1:
                msg = f"player {n} infoset {u!r} is reached through different own histories"
                if raise_error:
                    raise PerfectRecallError(msg)
                return msg
    return None


# -- strategies and normal form ------------------------------------------------

def pure_strategies(tree: GameTree, n: int, cap: int = 4096) -> list[PureStrategy]:
    isets = tree.infosets(n)
    menus = [tree.infoset_actions(n, u) for u in isets]
    count = math.prod(len(m) for m in menus)
    if count > cap:
        raise GameFileError("size-guard", f"player {n} has {count} pure strategies (cap {cap})")
    return [PureStrategy(n, tuple(zip(isets, combo))) for combo in itertools.product(*menus)]


def outcome_of_pure(tree: GameTree, profile: list[PureStrategy]) -> dict[str, float]:
    """Terminal distribution under a pure profile (indexed by player - 1), Nature averaged."""
    choice = {}
    for s in profile:
        for u, a in s.choices:
            choice[(s.player, u)] = a
    out: dict[str, float] = {}
    stack = [(tree.root, 1.0)]
    while stack:
        cur, w = stack.pop()
        if cur in tree.terminals:
            out[cur] = out.get(cur, 0.0) + w
            continue
        v = tree.nodes[cur]
        if v.player == NATURE:
            for a in v.actions:
                if a.prob > 0:
                    stack.append((a.child, w * a.prob))
        else:
            lab = choice[(v.player, v.infoset)]
            stack.append((next(a.child for a in v.actions if a.label == lab), w))
    return out


def build_normal_form(tree: GameTree, cap: int = 4096):
    from .polygame import PolytopeGame
    from .polytope import simplex

    strategies = [pure_strategies(tree, n, cap) for n in range(1, tree.players + 1)]
    shape = tuple(len(s) for s in strategies)
    table = np.zeros((tree.players,) + shape)
    for idx in itertools.product(*(range(k) for k in shape)):
        dist = outcome_of_pure(tree, [strategies[m][i] for m, i in enumerate(idx)])
        for z, w in dist.items():
            table[(slice(None),) + idx] += w * np.asarray(tree.terminals[z])
    polys = [simplex(k) for k in shape]
    labels = [[s.label for s in ss] for ss in strategies]
    return PolytopeGame.from_multilinear(polys, table, labels=labels)
