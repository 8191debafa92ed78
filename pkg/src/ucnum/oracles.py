"""Brute-force and convex certification oracles.

Everything here is independent of the simulation engines: the
discretized optimum enumerates payoff-profile multisets directly, the
continuous optimum runs a conditional-gradient method over the profile
simplex whose linear subproblem is the max-weight oracle, and the dual
value gives a weak-duality upper bound that certifies both.

Utility values are on the raw scale unless ``normalized`` is requested;
with identical utility shapes across nodes the maximizer sets coincide.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselines import max_weight_oracle
from .cnum import flow_control_solve
from .errors import ConfigError
from .games import GameEnvironment, UtilitySpec

__all__ = ["brute_force_gnum_optimum", "concave_optimum", "dual_value"]

MULTISET_CAP = 2_000_000


@dataclass(frozen=True)
class BruteForceResult:
    """All maximizing K-multisets (canonically sorted profile tuples)."""

    value: float
    optima: tuple[tuple[tuple[int, ...], ...], ...]
    rates: tuple[tuple[float, ...], ...]
    k: int

    @property
    def multiset(self) -> tuple[tuple[int, ...], ...]:
        return self.optima[0]

    @property
    def rbar(self) -> np.ndarray:
        return np.asarray(self.rates[0])


def _utility_sum(u_specs, rates, normalized: bool) -> float:
    if normalized:
        return float(sum(s.normalized(r) for s, r in zip(u_specs, rates)))
    return float(sum(s.value(r) for s, r in zip(u_specs, rates)))


def brute_force_gnum_optimum(
    env: GameEnvironment,
    k: int,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
    normalized: bool = False,
    tie_tol: float = 1e-9,
) -> BruteForceResult:
    """Exhaustive maximum of sum_i u_i(mean payoff) over K-multisets of
    profiles (occupation measures with weights in {0, 1/K, ..., 1}).

    The weight budget is treated as an equality: utilities increase, so
    no optimum leaves slack.  Ties within ``tie_tol`` of the maximum are
    all returned, each as a sorted profile tuple.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    total = env.profile_count
    n_multisets = 1
    for j in range(k):
        n_multisets = n_multisets * (total + j) // (j + 1)
    if n_multisets > MULTISET_CAP:
        raise ConfigError(
            f"multiset enumeration above cap ({n_multisets} > {MULTISET_CAP})"
        )

    best_value = -np.inf
    candidates: list[tuple[float, tuple[int, ...], np.ndarray]] = []
    for combo in itertools.combinations_with_replacement(range(total), k):
        rates = env.payoffs[list(combo)].mean(axis=0)
        value = _utility_sum(u_specs, rates, normalized)
        if value > best_value:
            best_value = value
        candidates.append((value, combo, rates))

    optima = []
    rates_out = []
    for value, combo, rates in candidates:
        if value >= best_value - tie_tol:
            optima.append(tuple(env.index_profile(i) for i in combo))
            rates_out.append(tuple(float(r) for r in rates))
    return BruteForceResult(
        value=best_value, optima=tuple(optima), rates=tuple(rates_out), k=k
    )


@dataclass(frozen=True)
class ConcaveOptimum:
    weights: np.ndarray
    rbar: np.ndarray
    value: float
    certified_gap: float
    iterations: int


def _line_search(env, u_specs, p, direction, hi):
    """Exact 1-D maximization of the concave section t -> F(p + t d)."""
    d_rate = direction @ env.payoffs
    base = p @ env.payoffs

    def slope(t):
        rates = base + t * d_rate
        return float(
            sum(s.derivative(np.clip(r, 0.0, 1.0)) * dr for s, r, dr in zip(u_specs, rates, d_rate))
        )

    lo, up = 0.0, hi
    if slope(up) >= 0.0:
        return up
    if slope(lo) <= 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + up)
        if slope(mid) > 0.0:
            lo = mid
        else:
            up = mid
        if up - lo < 1e-15:
            break
    return 0.5 * (lo + up)


def concave_optimum(
    env: GameEnvironment,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    normalized: bool = False,
) -> ConcaveOptimum:
    """Maximize sum_i u_i(r_i(p)) over the profile simplex.

    Conditional gradient with away steps and exact line search; the
    linear subproblem is the max-weight oracle at the current marginal
    utilities.  Stops when the conditional-gradient gap (a weak-duality
    certificate for the distance to the true optimum) drops below
    ``tol``.
    """
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    for s in u_specs:
        if not s.strictly_concave:
            raise ConfigError(f"{s.kind} utility is not strictly concave")
    total = env.profile_count
    p = np.full(total, 1.0 / total)
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rates = np.clip(p @ env.payoffs, 0.0, 1.0)
        lam = np.array([s.derivative(r) for s, r in zip(u_specs, rates)])
        grad = env.payoffs @ lam
        fw_profile, fw_score = max_weight_oracle(env, lam)
        fw_idx = env.profile_index(fw_profile)
        gap = fw_score - float(grad @ p)
        if gap <= tol:
            break
        support = np.flatnonzero(p > 0.0)
        away_idx = support[int(np.argmin(grad[support]))]

        fw_dir = -p.copy()
        fw_dir[fw_idx] += 1.0
        fw_gain = float(grad @ fw_dir)
        away_gain = float(grad @ p) - float(grad[away_idx])
        if fw_gain >= away_gain:
            direction, hi = fw_dir, 1.0
        else:
            direction = p.copy()
            direction[away_idx] -= 1.0
            w = p[away_idx]
            hi = w / (1.0 - w) if w < 1.0 else 0.0
        if hi <= 0.0:
            break
        t = _line_search(env, u_specs, p, direction, hi)
        if t <= 0.0:
            break
        p = p + t * direction
        p = np.clip(p, 0.0, None)
        p /= p.sum()

    rates = np.clip(p @ env.payoffs, 0.0, 1.0)
    value = _utility_sum(u_specs, rates, normalized)
    return ConcaveOptimum(
        weights=p, rbar=rates, value=value, certified_gap=float(max(gap, 0.0)), iterations=it
    )


def dual_value(
    env: GameEnvironment,
    lam,
    u_specs: Optional[Sequence[UtilitySpec]] = None,
) -> float:
    """d(lam) = sum_i max_a [u_i(a) - lam_i a] + max-weight(lam).

    By weak duality this upper-bounds the continuous optimum for every
    nonnegative price vector (raw utility scale).
    """
    u_specs = tuple(u_specs) if u_specs is not None else env.utilities
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0.0):
        raise ConfigError("prices must be nonnegative")
    node_part = 0.0
    for spec, price in zip(u_specs, lam):
        alpha = flow_control_solve(spec, float(price))
        node_part += spec.value(alpha) - price * alpha
    _, network_part = max_weight_oracle(env, lam)
    return float(node_part + network_part)
