"""Price-driven dynamics with per-frame flow control.

Time is split into frames of T slots.  Within a frame each node runs the
same repeat/experiment mood dynamics as the windowed engine (with K=1),
but the satisfaction exponent is 1 - lam_i * r_i / lam_max: a node's
willingness to settle scales with its current price lam_i and realized
payoff.  At a frame boundary each node solves a one-dimensional flow
control problem, argmax_a u_i(a) - lam_i * a over [0,1], and moves its
price by a subgradient step towards balancing that target against the
measured service rate.

Prices stay in [0, V+1] whenever lam_0 < V+1, every step size is <= 1,
and payoffs stay in [0,1]; the engine enforces this as a runtime check
(the exponent above would otherwise leave [0,1], which is an abort).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, InvariantViolation
from .games import GameEnvironment, UtilitySpec
from .trace import RunTrace, Stopwatch, config_hash

__all__ = [
    "CNumConfig",
    "CNumNodeState",
    "flow_control_solve",
    "lambda_update",
    "step_sizes",
    "run_cnum",
]

LAMBDA_TOL = 1e-12


@dataclass(frozen=True)
class CNumConfig:
    """Frame-structured run parameters.

    ``step_kind`` selects the subgradient schedule: 'decreasing' uses
    b(l) = step_scale / l, 'fixed' uses b(l) = step_size.  The bounded-
    price guarantee needs every b(l) <= 1.
    """

    epsilon: float
    frame_len: int
    n_frames: int
    c: Optional[float] = None
    lambda0: float = 1.0
    step_kind: str = "decreasing"
    step_size: float = 0.1
    step_scale: float = 1.0
    v_bound: Optional[float] = None
    eta: float = 0.05
    seed: int = 0
    check_invariants: bool = True

    def resolve(self, env: GameEnvironment, u_specs) -> "CNumConfig":
        cfg = self
        if cfg.c is None:
            cfg = replace(cfg, c=float(env.n_nodes + 1))
        if cfg.v_bound is None:
            cfg = replace(cfg, v_bound=max(s.v_bound for s in u_specs))
        if not 0.0 < cfg.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")
        if cfg.c <= env.n_nodes:
            raise ConfigError("c must exceed the node count")
        if cfg.frame_len < 1 or cfg.n_frames < 0:
            raise ConfigError("frame_len must be >= 1 and n_frames >= 0")
        if cfg.step_kind not in ("decreasing", "fixed"):
            raise ConfigError("step_kind must be 'decreasing' or 'fixed'")
        if cfg.step_kind == "fixed" and not 0.0 < cfg.step_size:
            raise ConfigError("fixed step size must be positive")
        if not cfg.lambda0 < cfg.v_bound + 1.0:
            raise ConfigError("lambda0 must start below V + 1")
        if cfg.lambda0 < 0.0:
            raise ConfigError("lambda0 must be nonnegative")
        return cfg

    def to_dict(self) -> dict:
        return {
            "algo": "cnum",
            "epsilon": self.epsilon,
            "frame_len": self.frame_len,
            "n_frames": self.n_frames,
            "c": self.c,
            "lambda0": self.lambda0,
            "step_kind": self.step_kind,
            "step_size": self.step_size,
            "step_scale": self.step_scale,
            "v_bound": self.v_bound,
            "eta": self.eta,
            "seed": self.seed,
        }


@dataclass
class CNumNodeState:
    """One node's carry-over between slots."""

    action: int
    payoff: float
    content: bool
    price: float


def step_sizes(cfg: CNumConfig, n_frames: Optional[int] = None) -> np.ndarray:
    """The b(l) schedule for frames l = 1..L."""
    length = n_frames if n_frames is not None else cfg.n_frames
    l = np.arange(1, length + 1, dtype=float)
    if cfg.step_kind == "decreasing":
        return cfg.step_scale / l
    return np.full(length, cfg.step_size)


def flow_control_solve(u_spec: UtilitySpec, lam: float, tol: float = 1e-10) -> float:
    """argmax over a in [0,1] of u(a) - lam * a.

    Library shapes use the closed form u'(a) = lam clamped to [0,1];
    table utilities take the exact breakpoint maximum.  Utilities that
    are not strictly concave have no unique maximizer and are rejected.
    """
    if lam < 0.0:
        raise ConfigError("flow control price must be nonnegative")
    if not u_spec.strictly_concave:
        if u_spec.kind == "table":
            raise ConfigError("table utility is not strictly concave")
        raise ConfigError(f"{u_spec.kind} utility is not strictly concave")
    if u_spec.kind == "log_offset":
        if lam == 0.0:
            return 1.0
        return float(np.clip(1.0 / lam - u_spec.delta, 0.0, 1.0))
    if u_spec.kind == "log1p":
        if lam == 0.0:
            return 1.0
        return float(np.clip(1.0 / lam - 1.0, 0.0, 1.0))
    # strictly concave piecewise-linear table: the maximum of the
    # piecewise-linear objective sits on a breakpoint, so scan them
    grid = np.linspace(0.0, 1.0, len(u_spec.table))
    objective = np.asarray(u_spec.table) - lam * grid
    return float(grid[int(np.argmax(objective))])


def _bisect_flow_control(u_spec: UtilitySpec, lam: float, tol: float = 1e-10) -> float:
    """Derivative bisection fallback; cross-checks the closed forms."""
    lo_d = u_spec.derivative(1.0) - lam
    hi_d = u_spec.derivative(0.0) - lam
    if hi_d <= 0.0:
        return 0.0
    if lo_d >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if u_spec.derivative(mid) - lam > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lambda_update(lam, b: float, target, service):
    """Projected subgradient step [lam + b (target - service)]^+."""
    return np.maximum(np.asarray(lam, float) + b * (np.asarray(target, float) - np.asarray(service, float)), 0.0)


def run_cnum(
    env: GameEnvironment,
    cfg: CNumConfig,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
    frame_diagnostic: Optional[Callable[[np.ndarray], dict]] = None,
) -> RunTrace:
    """Run L frames of T slots; returns a frame-level trace.

    Columns: frame, step b(l), per-node price lam_i(l), flow target
    rbar_i(l), frame payoff sum and mean s_i(l), running mean rate,
    normalized utility of the running mean, summed utility, and the
    step-weighted running aggregates (b-bar, Cesaro flow targets, and
    the summed utility of those targets).

    ``frame_diagnostic``, when given, is called with the frame's price
    vector and may return extra per-frame scalars (e.g. an exact
    chain-based price gap); they are recorded as trace columns.
    """
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    if len(u_specs) != env.n_nodes:
        raise ConfigError("one utility spec per node required")
    cfg = cfg.resolve(env, u_specs)
    n = env.n_nodes
    lam_max = cfg.v_bound + 1.0
    strides = np.asarray(env.strides, np.int64)
    sizes = np.asarray(env.n_actions, np.int64)
    pay = env.payoffs
    b = step_sizes(cfg)
    if cfg.check_invariants and np.any(b > 1.0 + LAMBDA_TOL):
        raise ConfigError("step sizes above 1 void the bounded-price guarantee")

    lam = np.full(n, float(cfg.lambda0))
    a_prev = np.zeros(n, np.int64)
    r_prev = np.zeros(n, np.float64)
    q = np.zeros(n, np.uint8)
    profile_counts = np.zeros(env.profile_count, np.int64)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(n)]

    L = cfg.n_frames
    lam_hist = np.zeros((L, n))
    target_hist = np.zeros((L, n))
    sum_hist = np.zeros((L, n))
    diag_rows: list[dict] = []
    max_lambda = float(np.max(lam))

    with Stopwatch() as clock:
        started = 0
        for l in range(L):
            if np.any(lam > lam_max + LAMBDA_TOL) or np.any(lam < 0.0):
                raise InvariantViolation(
                    f"price left [0, V+1] at frame {l + 1}: {lam.tolist()}"
                )
            lam_hist[l] = lam
            target_hist[l] = [flow_control_solve(u_specs[i], lam[i]) for i in range(n)]
            if frame_diagnostic is not None:
                diag_rows.append(frame_diagnostic(lam.copy()))
            uniforms = np.stack([g.random((cfg.frame_len, 2)) for g in streams])
            pay_sums, _ = _kernels.cnum_run_frame(
                pay, strides, sizes, cfg.epsilon, cfg.c,
                lam, lam_max, uniforms, a_prev, r_prev, q, started,
                profile_counts,
            )
            started = 1
            sum_hist[l] = pay_sums
            service = pay_sums / cfg.frame_len
            lam = lambda_update(lam, b[l], target_hist[l], service)
            max_lambda = max(max_lambda, float(np.max(lam)))
    wall = clock.elapsed

    service_hist = sum_hist / cfg.frame_len
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
        data[f"payoff_sum_{i}"] = sum_hist[:, i]
        data[f"service_{i}"] = service_hist[:, i]
        data[f"mean_rate_{i}"] = running_rate[:, i]
        utils[:, i] = u_specs[i].normalized(running_rate[:, i])
        cesaro_utils[:, i] = u_specs[i].normalized(cesaro_targets[:, i])
        data[f"utility_{i}"] = utils[:, i]
        data[f"cesaro_target_{i}"] = cesaro_targets[:, i]
    data["sum_utility"] = utils.sum(axis=1)
    data["b_bar"] = b_bar
    data["cesaro_sum_utility"] = cesaro_utils.sum(axis=1)
    if diag_rows:
        for key in diag_rows[0]:
            data[f"diag_{key}"] = np.array([row[key] for row in diag_rows])
    columns = tuple(data)

    cfg_dict = cfg.to_dict()
    if L > 0:
        raw_cesaro = float(
            sum(u_specs[i].value(cesaro_targets[-1, i]) for i in range(n))
        )
        raw_rate = float(sum(u_specs[i].value(running_rate[-1, i]) for i in range(n)))
    else:
        raw_cesaro = raw_rate = None
    total_slots = cfg.frame_len * cfg.n_frames
    meta = {
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": cfg.seed,
        "wall_time_s": wall,
        "lambda_max": lam_max,
        "max_lambda_seen": max_lambda,
        "final_lambda": lam.tolist(),
        "final_mean_rate": running_rate[-1].tolist() if L else None,
        "final_cesaro_targets": cesaro_targets[-1].tolist() if L else None,
        "final_sum_utility": float(data["sum_utility"][-1]) if L else None,
        "final_cesaro_sum_utility": (
            float(data["cesaro_sum_utility"][-1]) if L else None
        ),
        "final_raw_sum_utility": raw_rate,
        "final_raw_cesaro_sum_utility": raw_cesaro,
        "profile_occupation": (
            (profile_counts / total_slots).tolist()
            if total_slots
            else profile_counts.astype(float).tolist()
        ),
    }
    return RunTrace(algo="cnum", columns=columns, data=data, meta=meta)
