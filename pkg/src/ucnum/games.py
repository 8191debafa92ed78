"""Finite payoff games with per-node utility shapes.

A game couples N nodes only through a payoff map: each joint action
profile yields a payoff vector in [0,1]^N.  Nodes never see the map,
only their own realized payoffs; everything downstream (the dynamics,
the chain analysis, the certification oracles) consumes the structures
defined here.

Payoff tables whose entries exceed 1 are rescaled by their global
maximum at load time, so every stored table is already in [0,1].
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "UtilitySpec",
    "GameEnvironment",
    "OccupationMeasure",
    "evaluate_payoffs",
    "average_payoff",
    "check_interdependence",
    "normalized_utility",
    "load_game",
    "save_game",
    "two_node_benchmark",
    "random_interior_game",
]


class GameFormatError(ValueError):
    """Raised when a game definition is malformed."""


# ---------------------------------------------------------------------------
# utilities


@dataclass(frozen=True)
class UtilitySpec:
    """Monotone increasing utility of a long-run average rate in [0,1].

    Supported kinds:

    * ``log_offset``  -- u(r) = log(delta + r), delta > 0
    * ``log1p``       -- u(r) = log(1 + r)
    * ``affine``      -- u(r) = r (concave but not strictly; the flow
      controller rejects it)
    * ``table``       -- piecewise-linear interpolation of monotone
      samples on a uniform grid over [0,1]

    ``value`` is the raw shape used by flow control and the dual; the
    normalized form maps [0,1] onto [0,1] exactly and is what the
    satisfaction exponents consume.
    """

    kind: str
    delta: float = 0.0
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("log_offset", "log1p", "affine", "table"):
            raise GameFormatError(f"unknown utility kind {self.kind!r}")
        if self.kind == "log_offset" and not self.delta > 0.0:
            raise GameFormatError("log_offset requires delta > 0")
        if self.kind == "table":
            if len(self.table) < 2:
                raise GameFormatError("table utility needs at least 2 samples")
            diffs = np.diff(self.table)
            if not np.all(diffs >= 0.0):
                raise GameFormatError("table utility must be monotone increasing")

    def value(self, r):
        """Raw utility at rate r (scalar or array), r in [0,1]."""
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-12) or np.any(r > 1.0 + 1e-12):
            raise ValueError("rate outside [0,1]")
        r = np.clip(r, 0.0, 1.0)
        if self.kind == "log_offset":
            out = np.log(self.delta + r)
        elif self.kind == "log1p":
            out = np.log1p(r)
        elif self.kind == "affine":
            out = r.copy()
        else:
            grid = np.linspace(0.0, 1.0, len(self.table))
            out = np.interp(r, grid, self.table)
        return out if out.ndim else float(out)

    def normalized(self, r):
        """Utility affinely rescaled so that u(0) = 0 and u(1) = 1."""
        lo = self.value(0.0)
        hi = self.value(1.0)
        if not hi > lo:
            raise ValueError("utility is constant on [0,1]; cannot normalize")
        out = (np.asarray(self.value(r)) - lo) / (hi - lo)
        return out if out.ndim else float(out)

    def derivative(self, r):
        """Raw derivative u'(r); table kind uses its right difference at 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == "log_offset":
            out = 1.0 / (self.delta + r)
        elif self.kind == "log1p":
            out = 1.0 / (1.0 + r)
        elif self.kind == "affine":
            out = np.ones_like(r)
        else:
            grid = np.linspace(0.0, 1.0, len(self.table))
            h = grid[1] - grid[0]
            slopes = np.diff(self.table) / h
            idx = np.minimum((r / h).astype(int), len(slopes) - 1)
            out = slopes[idx]
        return out if out.ndim else float(out)

    @property
    def strictly_concave(self) -> bool:
        if self.kind in ("log_offset", "log1p"):
            return True
        if self.kind == "affine":
            return False
        slopes = np.diff(self.table)
        return bool(np.all(np.diff(slopes) < 0.0))

    @property
    def v_bound(self) -> float:
        """V = u'(0) on the raw scale; bounds every feasible dual price."""
        return float(self.derivative(0.0))

    @property
    def lambda_max(self) -> float:
        return self.v_bound + 1.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "log_offset":
            d["delta"] = self.delta
        if self.kind == "table":
            d["table"] = list(self.table)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UtilitySpec":
        return cls(
            kind=d["kind"],
            delta=float(d.get("delta", 0.0)),
            table=tuple(d.get("table", ())),
        )


# ---------------------------------------------------------------------------
# environment


@dataclass(frozen=True)
class GameEnvironment:
    """N nodes, finite per-node action sets, payoff table into [0,1]^N.

    ``payoffs`` has shape (prod |A_i|, N) and is indexed by the mixed-radix
    joint index of the profile (node 0 is the most significant digit, so
    np.argmax tie-breaking is lexicographic in profiles).
    """

    action_labels: tuple[tuple[str, ...], ...]
    payoffs: np.ndarray
    utilities: tuple[UtilitySpec, ...]
    rescaled_by: float = 1.0

    def __post_init__(self):
        n = len(self.action_labels)
        if n < 1:
            raise GameFormatError("need at least one node")
        for labels in self.action_labels:
            if len(labels) < 2:
                raise GameFormatError("every node needs at least 2 actions")
            if len(set(labels)) != len(labels):
                raise GameFormatError("duplicate action labels")
        if len(self.utilities) != n:
            raise GameFormatError("one utility spec per node required")
        total = self.profile_count
        pay = np.asarray(self.payoffs, dtype=float)
        if pay.shape != (total, n):
            raise GameFormatError(
                f"payoff table shape {pay.shape} != ({total}, {n})"
            )
        if np.any(pay < 0.0):
            raise GameFormatError("payoffs must be nonnegative")
        if np.any(pay > 1.0):
            raise GameFormatError("payoffs must lie in [0,1] after rescaling")
        pay.setflags(write=False)
        object.__setattr__(self, "payoffs", pay)

    # -- structure -----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.action_labels)

    @property
    def n_actions(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.action_labels)

    @property
    def profile_count(self) -> int:
        return int(np.prod(self.n_actions))

    @property
    def strides(self) -> tuple[int, ...]:
        # mixed radix, node 0 most significant
        sizes = self.n_actions
        s = [1] * len(sizes)
        for i in range(len(sizes) - 2, -1, -1):
            s[i] = s[i + 1] * sizes[i + 1]
        return tuple(s)

    def profile_index(self, profile) -> int:
        return int(sum(a * s for a, s in zip(profile, self.strides)))

    def index_profile(self, idx: int) -> tuple[int, ...]:
        out = []
        for s in self.strides:
            out.append(idx // s)
            idx %= s
        return tuple(out)

    def profiles(self):
        """All joint profiles as index tuples, lexicographic order."""
        return itertools.product(*(range(k) for k in self.n_actions))

    def profile_label(self, profile) -> str:
        return ",".join(
            self.action_labels[i][a] for i, a in enumerate(profile)
        )

    def to_dict(self) -> dict:
        return {
            "nodes": self.n_nodes,
            "actions": [list(a) for a in self.action_labels],
            "payoffs": {
                self.profile_label(p): [
                    float(v) for v in self.payoffs[self.profile_index(p)]
                ]
                for p in self.profiles()
            },
            "utilities": [u.to_dict() for u in self.utilities],
        }


def _build_environment(action_labels, payoff_rows, utilities) -> GameEnvironment:
    labels = tuple(tuple(a) for a in action_labels)
    pay = np.asarray(payoff_rows, dtype=float)
    peak = float(pay.max()) if pay.size else 0.0
    scale = 1.0
    if peak > 1.0:
        scale = peak
        pay = pay / peak
    return GameEnvironment(
        action_labels=labels,
        payoffs=pay,
        utilities=tuple(utilities),
        rescaled_by=scale,
    )


def make_game(action_labels, payoff_map, utilities) -> GameEnvironment:
    """Build an environment from a {profile tuple: payoff vector} map.

    ``payoff_map`` may instead be a callable profile -> payoff vector;
    it is evaluated once per profile (deterministic generator form).
    """
    labels = tuple(tuple(a) for a in action_labels)
    sizes = [len(a) for a in labels]
    total = int(np.prod(sizes))
    rows = np.zeros((total, len(labels)))
    lookup = payoff_map if callable(payoff_map) else payoff_map.__getitem__
    idx = 0
    for profile in itertools.product(*(range(k) for k in sizes)):
        rows[idx] = np.asarray(lookup(profile), dtype=float)
        idx += 1
    return _build_environment(labels, rows, utilities)


# ---------------------------------------------------------------------------
# operations


def evaluate_payoffs(env: GameEnvironment, profile) -> np.ndarray:
    """Payoff vector of one joint profile (indices, not labels)."""
    return env.payoffs[env.profile_index(profile)]


@dataclass(frozen=True)
class OccupationMeasure:
    """Probability weights over joint profiles (dense, indexed jointly)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-12):
            raise ValueError("occupation weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("occupation weights must sum to 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def average_payoff(env: GameEnvironment, occupation) -> np.ndarray:
    """Expected payoff vector under an occupation measure over profiles."""
    w = occupation.weights if isinstance(occupation, OccupationMeasure) else np.asarray(occupation, dtype=float)
    if w.shape != (env.profile_count,):
        raise ValueError("occupation measure length != number of profiles")
    return w @ env.payoffs


def normalized_utility(spec: UtilitySpec, r):
    """Normalized utility of a rate; validates r in [0,1]."""
    return spec.normalized(r)


def check_interdependence(env: GameEnvironment):
    """Exhaustively test the coupling condition.

    For every proper nonempty node subset S and every profile a, some
    node outside S must see its payoff move for some joint deviation of
    S.  Returns (True, None) or (False, (S, profile)) with the first
    failing witness.
    """
    n = env.n_nodes
    sizes = env.n_actions
    pay = env.payoffs
    all_nodes = range(n)
    for r in range(1, n):
        for s_nodes in itertools.combinations(all_nodes, r):
            outside = [j for j in all_nodes if j not in s_nodes]
            for profile in env.profiles():
                base = pay[env.profile_index(profile)]
                moved = False
                for dev in itertools.product(*(range(sizes[i]) for i in s_nodes)):
                    q = list(profile)
                    for i, a in zip(s_nodes, dev):
                        q[i] = a
                    row = pay[env.profile_index(q)]
                    if any(row[j] != base[j] for j in outside):
                        moved = True
                        break
                if not moved:
                    return False, (tuple(s_nodes), tuple(profile))
    return True, None


# ---------------------------------------------------------------------------
# file format

_FORMAT_KEYS = {"nodes", "actions", "payoffs", "utilities"}


def save_game(env: GameEnvironment, path) -> None:
    """Write the canonical JSON form; floats round-trip exactly."""
    doc = env.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_game(source) -> GameEnvironment:
    """Load a game from a JSON path, a parsed dict, or ``builtin:<name>``."""
    if isinstance(source, GameEnvironment):
        return source
    if isinstance(source, str) and source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name in ("two-node", "two_node"):
            return two_node_benchmark()
        raise GameFormatError(f"unknown builtin game {name!r}")
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    missing = _FORMAT_KEYS - set(doc)
    if missing:
        raise GameFormatError(f"game file missing keys: {sorted(missing)}")
    labels = tuple(tuple(a) for a in doc["actions"])
    if len(labels) != int(doc["nodes"]):
        raise GameFormatError("'nodes' disagrees with the action table")
    utilities = [UtilitySpec.from_dict(u) for u in doc["utilities"]]
    label_index = [
        {lab: i for i, lab in enumerate(node_labels)} for node_labels in labels
    ]
    sizes = [len(a) for a in labels]
    total = int(np.prod(sizes))
    rows = np.full((total, len(labels)), np.nan)
    strides = [1] * len(sizes)
    for i in range(len(sizes) - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    for key, vec in doc["payoffs"].items():
        parts = key.split(",")
        if len(parts) != len(labels):
            raise GameFormatError(f"bad profile key {key!r}")
        try:
            profile = [label_index[i][p] for i, p in enumerate(parts)]
        except KeyError as exc:
            raise GameFormatError(f"unknown action label in {key!r}") from exc
        idx = sum(a * st for a, st in zip(profile, strides))
        rows[idx] = np.asarray(vec, dtype=float)
    if np.any(np.isnan(rows)):
        raise GameFormatError("payoff table does not cover every profile")
    return _build_environment(labels, rows, utilities)


# ---------------------------------------------------------------------------
# stock instances


def two_node_benchmark() -> GameEnvironment:
    """Two nodes, two actions each, strongly asymmetric throughput table.

    The second action of node 1 clashes with the first action of node 2:
    one ordering starves node 2, the swapped one starves node 1, and the
    diagonal profiles are nearly worthless for both.  Log utilities make
    time-sharing across the two good profiles strictly better than any
    fixed profile.
    """
    table = {
        (0, 0): (0.0001, 0.0001),
        (0, 1): (0.001, 0.8),
        (1, 0): (1.0, 0.001),
        (1, 1): (0.01, 0.01),
    }
    u = UtilitySpec(kind="log1p")
    return make_game((("a1", "a2"), ("a1", "a2")), table, (u, u))


def random_interior_game(
    rng: np.random.Generator,
    n_actions: tuple[int, ...],
    low: float = 0.05,
    high: float = 0.95,
    utility: UtilitySpec | None = None,
) -> GameEnvironment:
    """Random payoff table with entries strictly inside (0,1).

    Interior entries keep every normalized utility strictly below 1, so
    the induced satisfaction chains stay fully ergodic.
    """
    n = len(n_actions)
    total = int(np.prod(n_actions))
    rows = rng.uniform(low, high, size=(total, n))
    u = utility if utility is not None else UtilitySpec(kind="log1p")
    labels = tuple(
        tuple(f"a{k + 1}" for k in range(m)) for m in n_actions
    )
    return _build_environment(labels, rows, (u,) * n)
