"""Sequences, realization plans and enabling strategies.

A player's enabling strategy lists, for each of their last actions i, the
probability that their own play enables i, i.e. the realization-plan value of
the sequence ending in i. The enabling polytope is the projection of the
realization polytope onto those coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .game_tree import NATURE, GameTree, pure_strategies
from .polygame import PolytopeGame
from .polytope import Polytope, from_vertices

Sequence = tuple  # tuple of (infoset, action) pairs; () is the empty sequence


class NotInterior(ValueError):
    pass


@dataclass
class SequenceIndex:
    tree: GameTree
    player: int
    infosets: list[str]
    actions: dict[str, tuple[str, ...]]
    parent_seq: dict[str, Sequence]
    sequences: list[Sequence]
    last: list[Sequence]
    last_of: dict[str, int | None]
    cap: int = 4096
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {s: k for k, s in enumerate(self.sequences)}

    @property
    def dummy(self) -> bool:
        return not self.last

    def position(self, seq: Sequence) -> int:
        return self._pos[seq]

    def last_labels(self) -> list[str]:
        plain = [s[-1][1] for s in self.last]
        if len(set(plain)) == len(plain):
            return plain
        return [f"{s[-1][0]}:{s[-1][1]}" for s in self.last]

    def fiber(self, i: int) -> list[str]:
        return [z for z, j in self.last_of.items() if j == i]

    @cached_property
    def strategies(self):
        return pure_strategies(self.tree, self.player, self.cap)

    def realization(self, behavior: dict[str, dict[str, float]]) -> np.ndarray:
        r = np.zeros(len(self.sequences))
        r[0] = 1.0
        for k, s in enumerate(self.sequences[1:], start=1):
            u, a = s[-1]
            r[k] = r[self._pos[s[:-1]]] * behavior[u][a]
        return r

    def pure_realization(self, s) -> np.ndarray:
        return self.realization({u: {a: float(a == s.action_at(u)) for a in self.actions[u]}
                                 for u in self.infosets})

    @cached_property
    def enables(self) -> np.ndarray:
        """0/1 matrix (|L_n| x |S_n|): does pure strategy s enable last action i."""
        cols = [self.pure_realization(s)[[self._pos[i] for i in self.last]] for s in self.strategies]
        return np.array(cols).T.reshape(len(self.last), len(self.strategies))


def build_sequences(tree: GameTree) -> list[SequenceIndex]:
    out = []
    zs = tree.terminal_ids()
    for n in range(1, tree.players + 1):
        isets = tree.infosets(n)
        actions = {u: tree.infoset_actions(n, u) for u in isets}
        parent_seq = {u: tree.own_sequence(tree.infoset_nodes(n, u)[0], n) for u in isets}
        seqs: list[Sequence] = [()]
        for u in isets:
            for a in actions[u]:
                seqs.append(parent_seq[u] + ((u, a),))
        # parents before children so realization() can run front to back
        seqs.sort(key=len)
        seqs = [()] + [s for s in seqs if s]
        seq_order = {s: k for k, s in enumerate(seqs)}
        last_set = {}
        for z in zs:
            own = tree.own_sequence(z, n)
            if own:
                last_set[z] = own
        lasts = sorted(set(last_set.values()), key=lambda s: _canon_key(s, isets, actions))
        lpos = {s: k for k, s in enumerate(lasts)}
        last_of = {z: (lpos[last_set[z]] if z in last_set else None) for z in zs}
        del seq_order
        out.append(SequenceIndex(tree, n, isets, actions, parent_seq, seqs, lasts, last_of))
    return out


def _canon_key(seq, isets, actions):
    u, a = seq[-1]
    return (isets.index(u), actions[u].index(a))


@dataclass
class RealizationPolytope:
    constraints: np.ndarray
    rhs: np.ndarray
    polytope: Polytope


def realization_polytope(idx: SequenceIndex) -> RealizationPolytope:
    m = len(idx.sequences)
    rows = [np.eye(1, m, 0).ravel()]
    rhs = [1.0]
    for u in idx.infosets:
        row = np.zeros(m)
        row[idx.position(idx.parent_seq[u])] = -1.0
        for a in idx.actions[u]:
            row[idx.position(idx.parent_seq[u] + ((u, a),))] += 1.0
        rows.append(row)
        rhs.append(0.0)
    verts = [idx.pure_realization(s) for s in idx.strategies]
    return RealizationPolytope(np.array(rows), np.array(rhs), from_vertices(verts))


def enabling_polytope(idx: SequenceIndex, realization: RealizationPolytope | None = None) -> Polytope:
    if idx.dummy:
        return from_vertices(np.zeros((1, 0)))
    if realization is None:
        realization = realization_polytope(idx)
    cols = [idx.position(s) for s in idx.last]
    return from_vertices(realization.polytope.vertices[:, cols])


def realization_vertices_in_last(idx: SequenceIndex, behaviors) -> np.ndarray:
    cols = [idx.position(s) for s in idx.last]
    return np.array([idx.realization(b)[cols] for b in behaviors])


def behavioral_shrink(idx: SequenceIndex, floor: float) -> Polytope:
    """Enabling strategies whose behavior puts at least ``floor`` on every action."""
    if idx.dummy:
        return from_vertices(np.zeros((1, 0)))
    behaviors = []
    for s in idx.strategies:
        b = {}
        for u in idx.infosets:
            k = len(idx.actions[u])
            b[u] = {a: (1 - (k - 1) * floor) if a == s.action_at(u) else floor for a in idx.actions[u]}
        behaviors.append(b)
    return from_vertices(realization_vertices_in_last(idx, behaviors))


# -- the enabling game -------------------------------------------------------------

@dataclass
class EnablingGame:
    tree: GameTree
    indices: list[SequenceIndex]
    game: PolytopeGame

    @property
    def polytopes(self) -> list[Polytope]:
        return self.game.polytopes

    def nu(self, n: int, profile) -> np.ndarray:
        """Per last action i of player n, payoff weight sum over Z_n(i) given opponents."""
        return self.game.gradient(n, profile)

    def nu_empty(self, n: int, profile) -> float:
        return self.game.constant_term(n, profile)


def terminal_game_tensor(tree: GameTree, indices: list[SequenceIndex], payoffs: np.ndarray) -> np.ndarray:
    """Homogeneous payoff tensor from terminal payoffs (shape (N, |Z|), DFS order)."""
    zs = tree.terminal_ids()
    shape = (tree.players,) + tuple(len(ix.last) + 1 for ix in indices)
    H = np.zeros(shape)
    for col, z in enumerate(zs):
        slot = tuple(len(ix.last) if ix.last_of[z] is None else ix.last_of[z] for ix in indices)
        H[(slice(None),) + slot] += tree.nature_weight(z) * payoffs[:, col]
    return H


def build_enabling_game(tree: GameTree, indices: list[SequenceIndex] | None = None) -> EnablingGame:
    if indices is None:
        indices = build_sequences(tree)
    polys = [enabling_polytope(ix) for ix in indices]
    H = terminal_game_tensor(tree, indices, tree.payoff_matrix())
    labels = [ix.last_labels() for ix in indices]
    return EnablingGame(tree, indices, PolytopeGame(polys, H, labels=labels))


# -- conversions ---------------------------------------------------------------------

def mixed_to_enabling(idx: SequenceIndex, sigma) -> np.ndarray:
    return idx.enables @ np.asarray(sigma, dtype=float)


def behavior_to_enabling(idx: SequenceIndex, behavior: dict[str, dict[str, float]]) -> np.ndarray:
    r = idx.realization(behavior)
    return r[[idx.position(s) for s in idx.last]]


def kuhn_mixture(idx: SequenceIndex, behavior: dict[str, dict[str, float]]) -> np.ndarray:
    return np.array([np.prod([behavior[u][s.action_at(u)] for u in idx.infosets]) for s in idx.strategies])


def enabling_to_behavior(idx: SequenceIndex, p, margin: float = 1e-10, strict: bool = True):
    """Behavior strategy inducing enabling strategy p (unique when p is interior)."""
    p = np.asarray(p, dtype=float)
    beta = {s: p[k] for k, s in enumerate(idx.last)}
    # children of each sequence: the infosets it leads to
    following: dict[Sequence, list[str]] = {}
    for u in idx.infosets:
        following.setdefault(idx.parent_seq[u], []).append(u)
    for s in sorted(idx.sequences, key=len, reverse=True):
        if s in beta:
            continue
        us = following.get(s)
        if not us:
            beta[s] = 0.0
            continue
        u = us[0]
        beta[s] = sum(beta[s + ((u, a),)] for a in idx.actions[u])
    beh = {}
    for u in idx.infosets:
        mass = beta[idx.parent_seq[u]]
        vals = {a: beta[idx.parent_seq[u] + ((u, a),)] for a in idx.actions[u]}
        if strict and (mass <= margin or min(vals.values()) <= margin):
            raise NotInterior(f"infoset {u!r} has aggregate mass at or below {margin:g}")
        if mass <= margin:
            beh[u] = {a: 1.0 / len(vals) for a in vals}
        else:
            beh[u] = {a: max(v, 0.0) / mass for a, v in vals.items()}
    return beh


def outcome_distribution(tree: GameTree, indices: list[SequenceIndex], profile) -> dict[str, float]:
    out = {}
    for z in tree.terminal_ids():
        w = tree.nature_weight(z)
        for ix, p in zip(indices, profile):
            j = ix.last_of[z]
            if j is not None:
                w *= p[j]
        out[z] = w
    return out


def random_behavior(idx: SequenceIndex, rng: np.random.Generator, floor: float = 0.0):
    beh = {}
    for u in idx.infosets:
        k = len(idx.actions[u])
        x = rng.dirichlet(np.ones(k))
        x = floor + (1 - k * floor) * x
        beh[u] = dict(zip(idx.actions[u], x))
    return beh
