"""Bundled example games, named component locators, and their expected degrees."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .game_tree import GameTree, parse_game

NAMES = ("fig1", "gy1", "gy3", "beerquiche")


@dataclass
class Example:
    name: str
    tree: GameTree
    # label -> a point (flat enabling coordinates) lying on that component
    locators: dict[str, np.ndarray] = field(default_factory=dict)
    # label -> expected degree, when known in advance
    expected: dict[str, int] = field(default_factory=dict)


def game_text(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown example {name!r}")
    return resources.files("polydeg").joinpath("fixtures", f"{name}.game").read_text(encoding="utf-8")


def load_tree(name: str) -> GameTree:
    return parse_game(game_text(name))


_LOCATORS = {
    # enabling order: player 1 [L, L1, R1], player 2 [l1, r1, l, r]
    "fig1": {
        "RR1-r": [0, 0, 1, 0.5, 0.5, 0, 1],
        "mixed": [0, 5 / 18, 13 / 18, 0.25, 0.75, 7 / 15, 8 / 15],
        "RL1-l": [0, 1, 0, 0.5, 0.5, 1, 0],
        "L-l1": [1, 0, 0, 1, 0, 0.5, 0.5],
    },
    # player 1 [B, T], player 2 [L, R]
    "gy1": {"T": [0, 1, 0, 1], "BL": [1, 0, 1, 0]},
    "gy3": {"BL": [1, 0, 1, 0]},
    # sender [B_s, Q_s, B_w, Q_w], receiver [F_B, NF_B, F_Q, NF_Q]
    "beerquiche": {
        "pooling-quiche": [0, 1, 0, 1, 0.75, 0.25, 0, 1],
        "pooling-beer": [1, 0, 1, 0, 0, 1, 0.75, 0.25],
    },
}

_EXPECTED = {
    # cross-checked against an independent normal-form index computation
    "fig1": {"RR1-r": 1, "mixed": 0, "RL1-l": 1, "L-l1": -1},
    "gy1": {"T": 0, "BL": 1},
    "gy3": {"BL": 1},
    "beerquiche": {"pooling-quiche": 0, "pooling-beer": 1},
}


def load(name: str) -> Example:
    locs = {k: np.asarray(v, dtype=float) for k, v in _LOCATORS[name].items()}
    return Example(name, load_tree(name), locs, dict(_EXPECTED[name]))


def fig1_shape(payoffs) -> GameTree:
    """The fig1 example tree with the given 6x2 terminal payoffs (rows z1..z6)."""
    tree = load_tree("fig1")
    table = np.asarray(payoffs, dtype=float).reshape(6, 2)
    return tree.with_payoffs({f"z{k + 1}": tuple(table[k]) for k in range(6)})


def random_fig1(seed: int, low: float = 0.0, high: float = 10.0) -> GameTree:
    rng = np.random.default_rng(seed)
    return fig1_shape(rng.uniform(low, high, size=(6, 2)))


def label_components(components, locators: dict[str, np.ndarray], tol: float = 1e-6) -> None:
    """Rename components after the locator lying on them."""
    for c in components:
        for label, point in locators.items():
            if c.distance(point) < tol:
                c.label = label
                break
