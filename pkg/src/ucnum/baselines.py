"""Centralized reference dynamics.

These have full knowledge of the payoff table, so they are not
implementations of the distributed algorithms; they bound what those
algorithms can achieve.  The exact-gradient run replaces the in-frame
chain with the max-weight profile itself, i.e. a noiseless subgradient
method on the dual.  The log-linear sampler is an illustrative
single-site comparison curve; its stationary law matches
exp(beta * sum lam_i r_i) only for payoff structures with a potential,
so it is used strictly as an empirical baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .cnum import CNumConfig, flow_control_solve, lambda_update, step_sizes
from .errors import ConfigError
from .games import GameEnvironment, UtilitySpec
from .trace import RunTrace, Stopwatch, config_hash

__all__ = [
    "max_weight_oracle",
    "exact_gradient_run",
    "loglinear_baseline_run",
    "loglinear_framed_run",
]

ENUMERATION_CAP = 1_000_000


def max_weight_oracle(env: GameEnvironment, lam, cap: int = ENUMERATION_CAP):
    """argmax over profiles of sum_i lam_i f_i(a).

    Ties break to the lexicographically smallest profile (the dense
    table is laid out in profile-lexicographic order, so the first
    maximum is that profile).  Returns (profile, weighted value).
    """
    if env.profile_count > cap:
        raise ConfigError(
            f"profile enumeration above cap ({env.profile_count} > {cap})"
        )
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (env.n_nodes,):
        raise ConfigError("one weight per node required")
    scores = env.payoffs @ lam
    idx = int(np.argmax(scores))
    return env.index_profile(idx), float(scores[idx])


def exact_gradient_run(
    env: GameEnvironment,
    cfg: CNumConfig,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
) -> RunTrace:
    """Deterministic dual subgradient with oracle service rates.

    Mirrors the frame trace of the stochastic engine: the 'service' of
    frame l is the payoff vector of the max-weight profile at the
    current prices, i.e. the in-frame chain replaced by its ideal
    selection.  No randomness, no slots.
    """
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    cfg = cfg.resolve(env, u_specs)
    n = env.n_nodes
    L = cfg.n_frames
    b = step_sizes(cfg)
    lam = np.full(n, float(cfg.lambda0))

    lam_hist = np.zeros((L, n))
    target_hist = np.zeros((L, n))
    service_hist = np.zeros((L, n))
    with Stopwatch() as clock:
        for l in range(L):
            lam_hist[l] = lam
            target_hist[l] = [flow_control_solve(u_specs[i], lam[i]) for i in range(n)]
            profile, _ = max_weight_oracle(env, lam)
            service_hist[l] = env.payoffs[env.profile_index(profile)]
            lam = lambda_update(lam, b[l], target_hist[l], service_hist[l])
    wall = clock.elapsed

    running_rate = np.cumsum(service_hist, axis=0) / np.arange(1, L + 1)[:, None]
    b_bar = np.cumsum(b)
    cesaro_targets = np.cumsum(b[:, None] * target_hist, axis=0) / b_bar[:, None]

    data: dict[str, np.ndarray] = {
        "frame": np.arange(1, L + 1, dtype=np.int64),
        "step": b,
    }
    utils = np.zeros((L, n))
    cesaro_utils = np.zeros((L, n))
    for i in range(n):
        data[f"lambda_{i}"] = lam_hist[:, i]
        data[f"target_{i}"] = target_hist[:, i]
        data[f"payoff_sum_{i}"] = service_hist[:, i] * cfg.frame_len
        data[f"service_{i}"] = service_hist[:, i]
        data[f"mean_rate_{i}"] = running_rate[:, i]
        utils[:, i] = u_specs[i].normalized(running_rate[:, i])
        cesaro_utils[:, i] = u_specs[i].normalized(cesaro_targets[:, i])
        data[f"utility_{i}"] = utils[:, i]
        data[f"cesaro_target_{i}"] = cesaro_targets[:, i]
    data["sum_utility"] = utils.sum(axis=1)
    data["b_bar"] = b_bar
    data["cesaro_sum_utility"] = cesaro_utils.sum(axis=1)
    columns = tuple(data)

    cfg_dict = {**cfg.to_dict(), "algo": "exact-gradient"}
    raw_cesaro = float(sum(u_specs[i].value(cesaro_targets[-1, i]) for i in range(n)))
    meta = {
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "wall_time_s": wall,
        "final_lambda": lam.tolist(),
        "final_cesaro_targets": cesaro_targets[-1].tolist(),
        "final_mean_rate": running_rate[-1].tolist(),
        "final_sum_utility": float(data["sum_utility"][-1]),
        "final_cesaro_sum_utility": float(data["cesaro_sum_utility"][-1]),
        "final_raw_cesaro_sum_utility": raw_cesaro,
    }
    return RunTrace(algo="exact-gradient", columns=columns, data=data, meta=meta)


@dataclass(frozen=True)
class LogLinearConfig:
    beta: float
    horizon: int
    seed: int = 0

    def to_dict(self) -> dict:
        return {"algo": "loglinear", "beta": self.beta, "horizon": self.horizon, "seed": self.seed}


def loglinear_baseline_run(
    env: GameEnvironment,
    lam,
    beta: float,
    horizon: int,
    seed: int = 0,
) -> RunTrace:
    """Single-site resampler at fixed weights lam.

    Each slot one uniformly chosen node redraws its action with
    probability proportional to exp(beta * lam_i * f_i(.)), holding the
    others fixed.  Returns profile occupation frequencies and mean
    payoffs.
    """
    if beta < 0.0:
        raise ConfigError("beta must be nonnegative")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (env.n_nodes,):
        raise ConfigError("one weight per node required")
    n = env.n_nodes
    strides = np.asarray(env.strides, np.int64)
    sizes = np.asarray(env.n_actions, np.int64)
    rng = np.random.default_rng(seed)
    actions = np.array([rng.integers(k) for k in env.n_actions], np.int64)
    profile_counts = np.zeros(env.profile_count, np.int64)
    pay_sums = np.zeros(n, np.float64)

    with Stopwatch() as clock:
        remaining = horizon
        while remaining > 0:
            m = min(remaining, 1_000_000)
            uniforms = rng.random((m, 2))
            _kernels.loglinear_run_chunk(
                env.payoffs, strides, sizes, lam, beta,
                uniforms, actions, profile_counts, pay_sums,
            )
            remaining -= m
    wall = clock.elapsed

    occupation = profile_counts / horizon
    cfg_dict = {
        "algo": "loglinear",
        "beta": beta,
        "horizon": horizon,
        "seed": seed,
        "lam": lam.tolist(),
    }
    data = {
        "profile": np.arange(env.profile_count, dtype=np.int64),
        "occupation": occupation,
    }
    meta = {
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": seed,
        "wall_time_s": wall,
        "mean_payoff": (pay_sums / horizon).tolist(),
        "profile_occupation": occupation.tolist(),
    }
    return RunTrace(algo="loglinear", columns=("profile", "occupation"), data=data, meta=meta)


def loglinear_framed_run(
    env: GameEnvironment,
    cfg: CNumConfig,
    beta: float,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
) -> RunTrace:
    """Price-adaptive variant: frames of single-site resampling at the
    current prices, then the same flow-control/subgradient update as the
    distributed engine.  Same trace schema as the frame engines."""
    if beta < 0.0:
        raise ConfigError("beta must be nonnegative")
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    cfg = cfg.resolve(env, u_specs)
    n = env.n_nodes
    L = cfg.n_frames
    b = step_sizes(cfg)
    strides = np.asarray(env.strides, np.int64)
    sizes = np.asarray(env.n_actions, np.int64)
    rng = np.random.default_rng(cfg.seed)
    actions = np.array([rng.integers(k) for k in env.n_actions], np.int64)
    lam = np.full(n, float(cfg.lambda0))

    lam_hist = np.zeros((L, n))
    target_hist = np.zeros((L, n))
    service_hist = np.zeros((L, n))
    with Stopwatch() as clock:
        for l in range(L):
            lam_hist[l] = lam
            target_hist[l] = [flow_control_solve(u_specs[i], lam[i]) for i in range(n)]
            counts = np.zeros(env.profile_count, np.int64)
            sums = np.zeros(n, np.float64)
            uniforms = rng.random((cfg.frame_len, 2))
            _kernels.loglinear_run_chunk(
                env.payoffs, strides, sizes, lam, beta,
                uniforms, actions, counts, sums,
            )
            service_hist[l] = sums / cfg.frame_len
            lam = lambda_update(lam, b[l], target_hist[l], service_hist[l])
    wall = clock.elapsed

    running_rate = np.cumsum(service_hist, axis=0) / np.arange(1, L + 1)[:, None]
    b_bar = np.cumsum(b)
    cesaro_targets = np.cumsum(b[:, None] * target_hist, axis=0) / b_bar[:, None]
    data: dict[str, np.ndarray] = {
        "frame": np.arange(1, L + 1, dtype=np.int64),
        "step": b,
    }
    utils = np.zeros((L, n))
    cesaro_utils = np.zeros((L, n))
    for i in range(n):
        data[f"lambda_{i}"] = lam_hist[:, i]
        data[f"target_{i}"] = target_hist[:, i]
        data[f"payoff_sum_{i}"] = service_hist[:, i] * cfg.frame_len
        data[f"service_{i}"] = service_hist[:, i]
        data[f"mean_rate_{i}"] = running_rate[:, i]
        utils[:, i] = u_specs[i].normalized(running_rate[:, i])
        cesaro_utils[:, i] = u_specs[i].normalized(cesaro_targets[:, i])
        data[f"utility_{i}"] = utils[:, i]
        data[f"cesaro_target_{i}"] = cesaro_targets[:, i]
    data["sum_utility"] = utils.sum(axis=1)
    data["b_bar"] = b_bar
    data["cesaro_sum_utility"] = cesaro_utils.sum(axis=1)
    columns = tuple(data)

    cfg_dict = {**cfg.to_dict(), "algo": "loglinear-framed", "beta": beta}
    meta = {
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": cfg.seed,
        "wall_time_s": wall,
        "final_lambda": lam.tolist(),
        "final_mean_rate": running_rate[-1].tolist(),
        "final_sum_utility": float(data["sum_utility"][-1]),
        "final_cesaro_sum_utility": float(data["cesaro_sum_utility"][-1]),
    }
    return RunTrace(algo="loglinear-framed", columns=columns, data=data, meta=meta)
