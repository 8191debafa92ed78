"""Trial-and-error dynamics driven by K-slot payoff windows.

Each node keeps a rolling window of its last K actions and payoffs and a
one-bit mood.  Content nodes replay the action from K slots ago with
probability 1 - eps^c and otherwise experiment uniformly over the other
actions; discontent nodes act uniformly at random.  A content node stays
content for sure only when it repeated its action and its payoff did not
move across the window; every other outcome is re-examined with
probability eps^(1 - u), where u is the normalized utility of the mean
payoff over the fresh window.

The first K slots of a run are warm-up: forced discontent with uniform
actions, so the windows are full before the first regular update.  Two
uniforms per node are consumed every slot (action first, then
satisfaction), even on branches whose outcome is deterministic, which
makes a run a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, InvariantViolation
from .games import GameEnvironment, UtilitySpec
from .trace import RunTrace, Stopwatch, config_hash

__all__ = ["GNumConfig", "GNumNodeState", "gnum_action_update", "gnum_satisfaction_update", "run_gnum"]

STATE_COUNT_CAP = 1 << 20


@dataclass(frozen=True)
class GNumConfig:
    """Run parameters. ``c`` defaults to n_nodes + 1 when omitted."""

    epsilon: float
    horizon: int
    k: int = 1
    c: Optional[float] = None
    seed: int = 0
    record_stride: int = 1
    check_invariants: bool = True
    count_states: bool = False

    def resolve(self, env: GameEnvironment) -> "GNumConfig":
        cfg = self
        if cfg.c is None:
            cfg = replace(cfg, c=float(env.n_nodes + 1))
        if not 0.0 < cfg.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")
        if cfg.c <= env.n_nodes:
            raise ConfigError("c must exceed the node count")
        if cfg.k < 1:
            raise ConfigError("window length k must be >= 1")
        if cfg.horizon < cfg.k:
            raise ConfigError("horizon shorter than the warm-up window")
        if cfg.record_stride < 1:
            raise ConfigError("record stride must be >= 1")
        return cfg

    def to_dict(self) -> dict:
        return {
            "algo": "gnum",
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "k": self.k,
            "c": self.c,
            "seed": self.seed,
            "record_stride": self.record_stride,
        }


@dataclass
class GNumNodeState:
    """One node's rolling state; index 0 of each window is the oldest slot."""

    action_window: list[int]
    payoff_window: list[float]
    content: bool = False

    @property
    def k(self) -> int:
        return len(self.action_window)


def gnum_action_update(
    state: GNumNodeState, n_actions: int, cfg: GNumConfig, rng: np.random.Generator
) -> int:
    """Draw the next action from exactly one uniform."""
    u = rng.random()
    if not state.content:
        return _kernels._uniform_int(u, n_actions)
    p_repeat = 1.0 - cfg.epsilon**cfg.c
    if u < p_repeat:
        return state.action_window[0]
    return _kernels._alternative_action(u, p_repeat, state.action_window[0], n_actions)


def gnum_satisfaction_update(
    state: GNumNodeState,
    new_action: int,
    new_payoff: float,
    u_spec: UtilitySpec,
    cfg: GNumConfig,
    rng: np.random.Generator,
) -> bool:
    """Next mood bit.  The draw is consumed even on the certain branch.

    The guaranteed-content condition compares the payoff K slots back
    with the fresh one; this single comparison is equivalent to equality
    of the two overlapping K-window sums because the windows share the
    other K-1 terms.
    """
    u = rng.random()
    repeated = new_action == state.action_window[0]
    same_pay = new_payoff == state.payoff_window[0]
    if state.content and repeated and same_pay:
        return True
    window = list(state.payoff_window[1:]) + [new_payoff]
    mean = sum(window) / cfg.k
    exponent = 1.0 - u_spec.normalized(mean)
    return bool(u < cfg.epsilon**exponent)


def step_node(
    state: GNumNodeState,
    env: GameEnvironment,
    profile,
    node: int,
    u_spec: UtilitySpec,
    cfg: GNumConfig,
) -> None:
    """Apply one completed slot to a node's window (used by the
    reference driver in tests; the production path is the jit kernel)."""
    payoff = float(env.payoffs[env.profile_index(profile), node])
    state.action_window = state.action_window[1:] + [profile[node]]
    state.payoff_window = state.payoff_window[1:] + [payoff]


def _utility_params(u_specs: Sequence[UtilitySpec]):
    n = len(u_specs)
    kinds = np.zeros(n, np.int64)
    deltas = np.zeros(n, np.float64)
    max_len = max((len(s.table) for s in u_specs), default=0)
    tables = np.zeros((n, max(max_len, 2)), np.float64)
    table_lens = np.zeros(n, np.int64)
    lo = np.zeros(n, np.float64)
    hi = np.zeros(n, np.float64)
    for i, s in enumerate(u_specs):
        kinds[i] = _kernels.KIND_CODES[s.kind]
        deltas[i] = s.delta
        if s.kind == "table":
            tables[i, : len(s.table)] = s.table
            table_lens[i] = len(s.table)
        lo[i] = s.value(0.0)
        hi[i] = s.value(1.0)
        if not hi[i] > lo[i]:
            raise ConfigError("utility must be strictly increasing on [0,1]")
    return kinds, deltas, tables, table_lens, lo, hi


CHUNK_SLOTS = 1_000_000


def run_gnum(
    env: GameEnvironment,
    cfg: GNumConfig,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
) -> RunTrace:
    """Simulate the windowed dynamics; returns a slot-level trace.

    Trace columns: slot, per-node action, payoff, mood bit, running mean
    payoff, normalized utility of the running mean, and the summed
    utility.  Metadata carries profile occupation frequencies and, when
    ``cfg.count_states`` is set and the product space is small enough,
    post-warm-up (history, mood) state frequencies.
    """
    cfg = cfg.resolve(env)
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    if len(u_specs) != env.n_nodes:
        raise ConfigError("one utility spec per node required")
    n = env.n_nodes
    k = cfg.k
    kinds, deltas, tables, table_lens, lo, hi = _utility_params(u_specs)
    strides = np.asarray(env.strides, np.int64)
    sizes = np.asarray(env.n_actions, np.int64)
    pay = env.payoffs

    states_total = env.profile_count**k * 2**n
    count_states = cfg.count_states and states_total <= STATE_COUNT_CAP
    state_counts = np.zeros(states_total if count_states else 0, np.int64)

    awin = np.zeros((n, k), np.int64)
    pwin = np.zeros((n, k), np.float64)
    win_prof = np.zeros(k, np.int64)
    q = np.zeros(n, np.uint8)
    cum_pay = np.zeros(n, np.float64)
    profile_counts = np.zeros(env.profile_count, np.int64)

    n_rec = (cfg.horizon - 1) // cfg.record_stride + 1
    rec = np.zeros((n_rec, 1 + 4 * n), np.float64)
    rec_used = 0
    violations = 0
    all_content = 0

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(n)]

    with Stopwatch() as clock:
        t0 = 1
        remaining = cfg.horizon
        while remaining > 0:
            m = min(remaining, CHUNK_SLOTS)
            uniforms = np.stack([g.random((m, 2)) for g in streams])
            rec_used, viol, ac = _kernels.gnum_run_chunk(
                pay, strides, sizes,
                kinds, deltas, tables, table_lens, lo, hi,
                cfg.epsilon, cfg.c, k, t0,
                uniforms, awin, pwin, win_prof, q, cum_pay,
                profile_counts, state_counts,
                cfg.record_stride, rec, rec_used,
            )
            violations += viol
            all_content += ac
            t0 += m
            remaining -= m
    wall = clock.elapsed

    if cfg.check_invariants and violations:
        raise InvariantViolation(
            f"window-sum test disagreed with the single payoff comparison on {violations} slots"
        )

    rec = rec[:rec_used]
    data: dict[str, np.ndarray] = {"slot": rec[:, 0].astype(np.int64)}
    for i in range(n):
        data[f"action_{i}"] = rec[:, 1 + i].astype(np.int64)
    for i in range(n):
        data[f"payoff_{i}"] = rec[:, 1 + n + i]
    for i in range(n):
        data[f"content_{i}"] = rec[:, 1 + 2 * n + i].astype(np.int64)
    utils = np.zeros((rec_used, n))
    for i in range(n):
        mean_col = rec[:, 1 + 3 * n + i]
        data[f"mean_payoff_{i}"] = mean_col
        utils[:, i] = u_specs[i].normalized(mean_col)
        data[f"utility_{i}"] = utils[:, i]
    data["sum_utility"] = utils.sum(axis=1)
    columns = tuple(data)

    cfg_dict = cfg.to_dict()
    meta = {
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": cfg.seed,
        "wall_time_s": wall,
        "profile_occupation": (profile_counts / cfg.horizon).tolist(),
        "all_content_fraction": all_content / cfg.horizon,
        "window_check_disagreements": int(violations),
        "final_mean_payoff": (cum_pay / cfg.horizon).tolist(),
        "final_sum_utility": float(
            sum(u_specs[i].normalized(cum_pay[i] / cfg.horizon) for i in range(n))
        ),
    }
    if count_states:
        meta["state_frequencies"] = (
            state_counts / max(cfg.horizon - k, 1)
        ).tolist()
    return RunTrace(algo="gnum", columns=columns, data=data, meta=meta)
