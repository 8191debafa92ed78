"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles, without
importing the modules under test (beyond plain game containers), so that
agreement with the package is evidence rather than tautology.
"""

from __future__ import annotations

import itertools

import numpy as np

from ucnum.games import GameEnvironment, UtilitySpec, make_game

FORCED_CONTENT_TOL = 1e-12


# ---------------------------------------------------------------------------
# state indexing shared by both reference builders

def state_count(env: GameEnvironment, k: int) -> int:
    return env.profile_count**k * 2 ** env.n_nodes


def encode_state(env: GameEnvironment, window, moods) -> int:
    idx = 0
    for w in window:
        idx = idx * env.profile_count + w
    for q in moods:
        idx = idx * 2 + q
    return idx


def decode_state(env: GameEnvironment, idx: int, k: int):
    n = env.n_nodes
    moods = []
    for _ in range(n):
        moods.append(idx % 2)
        idx //= 2
    moods.reverse()
    window = []
    for _ in range(k):
        window.append(idx % env.profile_count)
        idx //= env.profile_count
    window.reverse()
    return tuple(window), tuple(moods)


# ---------------------------------------------------------------------------
# windowed trial-and-error dynamics, one synchronous slot at a time

def reference_gnum_matrix(env: GameEnvironment, k: int, c: float, eps: float) -> np.ndarray:
    """Dense one-slot transition matrix built by direct enumeration."""
    n = env.n_nodes
    sizes = env.n_actions
    pay = env.payoffs
    n_states = state_count(env, k)
    mat = np.zeros((n_states, n_states))
    profiles = [env.index_profile(p) for p in range(env.profile_count)]

    for s in range(n_states):
        window, moods = decode_state(env, s, k)
        oldest = profiles[window[0]]
        oldest_pay = pay[window[0]]
        for combo in itertools.product(*(range(m) for m in sizes)):
            act_prob = 1.0
            for i, a in enumerate(combo):
                if moods[i]:
                    if a == oldest[i]:
                        act_prob *= 1.0 - eps**c
                    else:
                        act_prob *= eps**c / (sizes[i] - 1)
                else:
                    act_prob *= 1.0 / sizes[i]
            if act_prob == 0.0:
                continue
            new_prof = env.profile_index(combo)
            new_pay = pay[new_prof]
            new_window = window[1:] + (new_prof,)
            mean_pay = np.mean([pay[w] for w in new_window], axis=0)
            stay = np.empty(n)
            for i in range(n):
                if moods[i] and combo[i] == oldest[i] and new_pay[i] == oldest_pay[i]:
                    stay[i] = 1.0
                else:
                    expo = 1.0 - env.utilities[i].normalized(mean_pay[i])
                    stay[i] = 1.0 if expo <= FORCED_CONTENT_TOL else eps**expo
            for new_moods in itertools.product((0, 1), repeat=n):
                mood_prob = 1.0
                for i, q in enumerate(new_moods):
                    mood_prob *= stay[i] if q else 1.0 - stay[i]
                if mood_prob == 0.0:
                    continue
                t = encode_state(env, new_window, new_moods)
                mat[s, t] += act_prob * mood_prob
    return mat


# ---------------------------------------------------------------------------
# price-driven dynamics at frozen prices (single-slot window)

def reference_cnum_matrix(
    env: GameEnvironment,
    c: float,
    eps: float,
    lam,
    lam_max: float,
) -> np.ndarray:
    n = env.n_nodes
    sizes = env.n_actions
    pay = env.payoffs
    lam = np.asarray(lam, dtype=float)
    n_states = state_count(env, 1)
    mat = np.zeros((n_states, n_states))
    profiles = [env.index_profile(p) for p in range(env.profile_count)]

    for s in range(n_states):
        (prev_prof,), moods = decode_state(env, s, 1)
        prev = profiles[prev_prof]
        prev_pay = pay[prev_prof]
        for combo in itertools.product(*(range(m) for m in sizes)):
            act_prob = 1.0
            for i, a in enumerate(combo):
                if moods[i]:
                    if a == prev[i]:
                        act_prob *= 1.0 - eps**c
                    else:
                        act_prob *= eps**c / (sizes[i] - 1)
                else:
                    act_prob *= 1.0 / sizes[i]
            if act_prob == 0.0:
                continue
            new_prof = env.profile_index(combo)
            new_pay = pay[new_prof]
            stay = np.empty(n)
            for i in range(n):
                if moods[i] and combo[i] == prev[i] and new_pay[i] == prev_pay[i]:
                    stay[i] = 1.0
                else:
                    expo = 1.0 - lam[i] * new_pay[i] / lam_max
                    stay[i] = 1.0 if expo <= FORCED_CONTENT_TOL else eps**expo
            for new_moods in itertools.product((0, 1), repeat=n):
                mood_prob = 1.0
                for i, q in enumerate(new_moods):
                    mood_prob *= stay[i] if q else 1.0 - stay[i]
                if mood_prob == 0.0:
                    continue
                t = encode_state(env, (new_prof,), new_moods)
                mat[s, t] += act_prob * mood_prob
    return mat


# ---------------------------------------------------------------------------
# exhaustive minimum-weight spanning in-tree (leaf-removal subset DP)

def exhaustive_in_tree_weight(n_nodes, tails, heads, weights, root) -> float:
    """Exact minimum total weight over spanning in-trees rooted at ``root``.

    Peeling a leaf off any in-tree leaves an in-tree on the remaining
    nodes, so f(S) = min over v in S of f(S - v) + cheapest edge from v
    into (S - v) + root.  Exponential in n_nodes; keep it below ~16.
    """
    if n_nodes > 16:
        raise ValueError("exhaustive oracle is for small graphs only")
    others = [v for v in range(n_nodes) if v != root]
    pos = {v: i for i, v in enumerate(others)}
    m = len(others)

    best = {}
    for t, h, w in zip(tails, heads, weights):
        if t == root or t == h:
            continue
        key = (t, h)
        if w < best.get(key, np.inf):
            best[key] = w

    out_edges = {v: [] for v in others}
    for (t, h), w in best.items():
        out_edges[t].append((h, w))

    full = 1 << m
    f = np.full(full, np.inf)
    f[0] = 0.0
    for mask in range(1, full):
        acc = np.inf
        for v in others:
            bit = 1 << pos[v]
            if not mask & bit:
                continue
            rest = mask & ~bit
            if not np.isfinite(f[rest]):
                continue
            cheapest = np.inf
            for h, w in out_edges[v]:
                if h == root or (h != root and h in pos and rest & (1 << pos[h])):
                    if w < cheapest:
                        cheapest = w
            cand = f[rest] + cheapest
            if cand < acc:
                acc = cand
        f[mask] = acc
    return float(f[full - 1])


# ---------------------------------------------------------------------------
# stationary distributions without elimination, for cross-checks

def stationary_by_nullspace(mat: np.ndarray) -> np.ndarray:
    """Solve pi (P - I) = 0, sum pi = 1 by least squares on the full system."""
    n = mat.shape[0]
    a = np.vstack([mat.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


# ---------------------------------------------------------------------------
# shared tiny games

def decoupled_game() -> GameEnvironment:
    """Each node's payoff depends only on its own action (no coupling)."""
    u = UtilitySpec(kind="log1p")
    return make_game(
        (("x", "y"), ("x", "y")),
        lambda p: (0.2 + 0.5 * p[0], 0.3 + 0.4 * p[1]),
        (u, u),
    )


def common_interest_game() -> GameEnvironment:
    """Both nodes receive the same payoff; single-site resampling of the
    priced payoff is then exact Glauber for that shared landscape."""
    u = UtilitySpec(kind="log1p")
    table = {
        (0, 0): 0.15,
        (0, 1): 0.6,
        (1, 0): 0.35,
        (1, 1): 0.8,
    }
    return make_game(
        (("x", "y"), ("x", "y")),
        lambda p: (table[p], table[p]),
        (u, u),
    )


def constant_payoff_game(values=(0.4, 0.7)) -> GameEnvironment:
    u = UtilitySpec(kind="log1p")
    return make_game(
        (("x", "y"), ("x", "y")),
        lambda p: values,
        (u, u),
    )
