"""Exact finite-chain analysis of the windowed and price-driven dynamics.

The engines in :mod:`ucnum.gnum` and :mod:`ucnum.cnum` are Markov chains
over (window history, mood-bit) states once the exploration rate is
fixed.  This module builds that chain explicitly: every transition
probability is a single closed-form term ``base * eps**power *
prod(1 - eps**e)``, so the same object yields

- exact transition matrices and stationary distributions at any rate
  (GTH elimination on the unique closed communicating class),
- the resistance digraph (the limiting log-cost of each transition) and
  minimum in-tree potentials via a contraction-based exact arborescence
  algorithm, whose minimizers are the vanishing-rate support,
- Dobrushin coefficients, contraction factors, mixing-time bounds and
  exact total-variation decay curves,
- dual diagnostics for the price-driven chain at frozen prices.

State indexing matches the engines' occupation counters: window
profiles oldest first in mixed radix (base = number of joint profiles),
then mood bits with node 0 most significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .baselines import max_weight_oracle
from .cnum import flow_control_solve
from .errors import ConfigError, InvariantViolation
from .games import GameEnvironment, UtilitySpec
from .oracles import dual_value

__all__ = [
    "TransitionTerm",
    "ChainState",
    "PerturbedChain",
    "min_arborescence_weight",
    "all_roots_arborescence",
]

STATE_CAP = 20_000
RES_TOL = 1e-12


@dataclass(frozen=True)
class TransitionTerm:
    """One transition probability as a function of the exploration rate.

    probability(eps) = base * eps**power * prod_j (1 - eps**comps[j]);
    the resistance (limiting exponent as eps -> 0) is ``power`` because
    every complement factor tends to 1.
    """

    base: float
    power: float
    comps: tuple[float, ...]

    def probability(self, eps: float) -> float:
        p = self.base * eps**self.power
        for e in self.comps:
            p *= 1.0 - eps**e
        return p

    @property
    def resistance(self) -> float:
        return self.power


@dataclass(frozen=True)
class ChainState:
    """Window of joint-profile indices (oldest first) plus mood bits."""

    history: tuple[int, ...]
    content: tuple[int, ...]


def min_arborescence_weight(n_nodes, tails, heads, weights, root) -> float:
    """Weight of the minimum spanning arborescence rooted at ``root``
    (edges point away from the root: every other node has exactly one
    incoming edge).  Returns inf when no spanning arborescence exists.

    Contraction method: repeatedly take the cheapest incoming edge per
    node; absent cycles these edges are optimal, otherwise every cycle
    is contracted, its cheapest-edge weights banked, and the weights of
    edges entering the cycle reduced by the bank they displace.
    """
    T = np.asarray(tails, dtype=np.int64)
    H = np.asarray(heads, dtype=np.int64)
    W = np.asarray(weights, dtype=np.float64)
    keep = T != H
    T, H, W = T[keep], H[keep], W[keep]
    n = int(n_nodes)
    r = int(root)
    total = 0.0
    while True:
        if n == 1:
            return total
        best = np.full(n, np.inf)
        if W.size:
            np.minimum.at(best, H, W)
        best[r] = 0.0
        if np.isinf(best).any():
            return math.inf
        order = np.lexsort((W, H))
        Ho = H[order]
        first = np.ones(Ho.size, dtype=bool)
        first[1:] = Ho[1:] != Ho[:-1]
        sel = order[first]
        parent = np.full(n, -1, dtype=np.int64)
        parent[H[sel]] = T[sel]
        parent[r] = -1

        color = np.full(n, -1, dtype=np.int64)
        on_cycle = np.zeros(n, dtype=bool)
        cycles: list[list[int]] = []
        for v in range(n):
            if color[v] != -1:
                continue
            u = v
            while u != -1 and color[u] == -1:
                color[u] = v
                u = parent[u]
            if u != -1 and color[u] == v and not on_cycle[u]:
                cyc = [u]
                w2 = int(parent[u])
                while w2 != u:
                    cyc.append(w2)
                    w2 = int(parent[w2])
                for node in cyc:
                    on_cycle[node] = True
                cycles.append(cyc)

        if not cycles:
            return total + float(best.sum())

        for cyc in cycles:
            for node in cyc:
                total += float(best[node])

        comp = np.full(n, -1, dtype=np.int64)
        n_new = 0
        for cyc in cycles:
            for node in cyc:
                comp[node] = n_new
            n_new += 1
        for v in range(n):
            if comp[v] == -1:
                comp[v] = n_new
                n_new += 1

        entering = on_cycle[H]
        W = W.copy()
        W[entering] -= best[H[entering]]
        T = comp[T]
        H = comp[H]
        r = int(comp[r])
        keep = T != H
        T, H, W = T[keep], H[keep], W[keep]
        if T.size:
            key = T * n_new + H
            order = np.lexsort((W, key))
            ko = key[order]
            first = np.ones(ko.size, dtype=bool)
            first[1:] = ko[1:] != ko[:-1]
            sel = order[first]
            T, H, W = T[sel], H[sel], W[sel]
        n = n_new


def all_roots_arborescence(n_nodes, tails, heads, weights) -> np.ndarray:
    """Minimum arborescence weight for every possible root."""
    out = np.empty(n_nodes, dtype=float)
    for root in range(n_nodes):
        out[root] = min_arborescence_weight(n_nodes, tails, heads, weights, root)
    return out


class PerturbedChain:
    """Full state-space chain for one of the two dynamics.

    kind="gnum": window length ``k`` histories, mood updates driven by
    the normalized utility of the window-mean payoff.

    kind="cnum": one-slot window, mood updates driven by the priced
    payoff ``lam_i * r_i / lambda_max``; ``lam`` is frozen for the whole
    chain (one frame of the adaptive dynamics).
    """

    def __init__(
        self,
        env: GameEnvironment,
        kind: str = "gnum",
        k: int = 1,
        c: Optional[float] = None,
        u_specs: Optional[Sequence[UtilitySpec]] = None,
        lam=None,
        lambda_max: Optional[float] = None,
        state_cap: int = STATE_CAP,
    ):
        if kind not in ("gnum", "cnum"):
            raise ConfigError(f"unknown chain kind {kind!r}")
        self.env = env
        self.kind = kind
        n = env.n_nodes
        self.c = float(c) if c is not None else float(n + 1)
        if not self.c > 0.0:
            raise ConfigError("experimentation exponent c must be positive")
        self.u_specs = tuple(u_specs) if u_specs is not None else env.utilities
        if len(self.u_specs) != n:
            raise ConfigError("one utility spec per node required")

        if kind == "cnum":
            if k != 1:
                raise ConfigError("the price-driven chain has a one-slot window")
            if lam is None:
                raise ConfigError("the price-driven chain needs a price vector")
            lam_arr = np.asarray(lam, dtype=float)
            if lam_arr.shape != (n,):
                raise ConfigError("price vector length must match node count")
            if np.any(lam_arr < 0.0):
                raise ConfigError("prices must be nonnegative")
            self.lam = lam_arr
            self.lambda_max = (
                float(lambda_max)
                if lambda_max is not None
                else max(s.lambda_max for s in self.u_specs)
            )
            if np.any(lam_arr > self.lambda_max + 1e-12):
                raise ConfigError("prices exceed the bounded-price ceiling")
        else:
            if lam is not None:
                raise ConfigError("prices only apply to the price-driven chain")
            self.lam = None
            self.lambda_max = None

        if k < 1:
            raise ConfigError("window length k must be >= 1")
        self.k = int(k)
        prof = env.profile_count
        n_states = prof**self.k * 2**n
        if n_states > state_cap:
            raise ConfigError(
                f"state space too large ({n_states} states, cap {state_cap})"
            )
        self.n_states = n_states
        self._prof = prof
        self._n = n
        self.states = tuple(self._decode(i) for i in range(n_states))
        self._closed: Optional[np.ndarray] = None
        self._build_edges()

    # -- state coding ------------------------------------------------

    def state_index(self, history, content) -> int:
        idx = 0
        for h in history:
            idx = idx * self._prof + int(h)
        for b in content:
            idx = idx * 2 + (1 if b else 0)
        return idx

    def _decode(self, idx: int) -> ChainState:
        bits = []
        for _ in range(self._n):
            bits.append(idx & 1)
            idx >>= 1
        hist = []
        for _ in range(self.k):
            hist.append(idx % self._prof)
            idx //= self._prof
        return ChainState(tuple(reversed(hist)), tuple(reversed(bits)))

    def state_label(self, idx: int) -> str:
        st = self.states[idx]
        env = self.env
        window = ";".join(
            env.profile_label(env.index_profile(h)) for h in st.history
        )
        mood = "".join("C" if b else "D" for b in st.content)
        return f"{window}/{mood}"

    def uniform_content_index(self, profile_idx: int) -> int:
        """State whose whole window sits on one profile, all content."""
        return self.state_index((profile_idx,) * self.k, (1,) * self._n)

    def is_all_content(self, idx: int) -> bool:
        return all(self.states[idx].content)

    def is_all_discontent(self, idx: int) -> bool:
        return not any(self.states[idx].content)

    # -- transition structure ----------------------------------------

    def _mood_exponent(self, node: int, new_hist: tuple[int, ...], f_new: float) -> float:
        if self.kind == "gnum":
            mean = 0.0
            for h in new_hist:
                mean += float(self.env.payoffs[h, node])
            mean /= self.k
            e = 1.0 - self.u_specs[node].normalized(mean)
        else:
            e = 1.0 - self.lam[node] * f_new / self.lambda_max
        if e <= RES_TOL:
            return 0.0
        return float(e)

    def _build_edges(self) -> None:
        env = self.env
        n = self._n
        prof = self._prof
        sizes = env.n_actions
        pay = env.payoffs
        profiles = [env.index_profile(p) for p in range(prof)]

        tails: list[int] = []
        heads: list[int] = []
        terms: list[TransitionTerm] = []

        for x in range(self.n_states):
            st = self.states[x]
            old = st.history[0]
            a_old = profiles[old]
            f_old = pay[old]
            shifted = st.history[1:]
            for p in range(prof):
                a_new = profiles[p]
                f_new = pay[p]
                base = 1.0
                power = 0.0
                comps: list[float] = []
                for i in range(n):
                    if st.content[i]:
                        if a_new[i] == a_old[i]:
                            comps.append(self.c)
                        else:
                            base /= sizes[i] - 1
                            power += self.c
                    else:
                        base /= sizes[i]

                new_hist = shifted + (p,)
                free: list[int] = []
                exps = [0.0] * n
                for i in range(n):
                    persists = (
                        st.content[i]
                        and a_new[i] == a_old[i]
                        and f_new[i] == f_old[i]
                    )
                    if persists:
                        continue
                    e = self._mood_exponent(i, new_hist, float(f_new[i]))
                    exps[i] = e
                    if e > 0.0:
                        free.append(i)

                base_mood = [1] * n
                for bits in range(1 << len(free)):
                    power2 = power
                    comps2 = list(comps)
                    mood = list(base_mood)
                    for pos, i in enumerate(free):
                        if (bits >> pos) & 1:
                            power2 += exps[i]
                        else:
                            comps2.append(exps[i])
                            mood[i] = 0
                    y = self.state_index(new_hist, mood)
                    tails.append(x)
                    heads.append(y)
                    terms.append(
                        TransitionTerm(base, power2, tuple(sorted(comps2)))
                    )

        self.edge_tails = np.asarray(tails, dtype=np.int64)
        self.edge_heads = np.asarray(heads, dtype=np.int64)
        self.edge_terms = tuple(terms)
        self.edge_resistances = np.array(
            [t.resistance for t in terms], dtype=float
        )

    def transition_matrix(self, eps: float) -> np.ndarray:
        if not 0.0 < eps < 1.0:
            raise ConfigError("exploration rate must lie in (0, 1)")
        mat = np.zeros((self.n_states, self.n_states))
        probs = np.array([t.probability(eps) for t in self.edge_terms])
        np.add.at(mat, (self.edge_tails, self.edge_heads), probs)
        rows = mat.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-9:
            raise InvariantViolation("transition rows do not sum to one")
        return mat

    # -- resistances and potentials ----------------------------------

    def resistance_edges(self):
        """(tails, heads, resistances) of the limiting log-cost digraph."""
        return self.edge_tails, self.edge_heads, self.edge_resistances

    def in_tree_potentials(self) -> np.ndarray:
        """Minimum total resistance of a spanning in-tree per root.

        A root's in-tree weight is computed as the minimum out-
        arborescence of the reversed resistance digraph; roots no other
        state can reach come out infinite.
        """
        return all_roots_arborescence(
            self.n_states, self.edge_heads, self.edge_tails, self.edge_resistances
        )

    def stable_states(self, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """(indices of minimum-potential states, full potential vector)."""
        gamma = self.in_tree_potentials()
        finite = gamma[np.isfinite(gamma)]
        if finite.size == 0:
            raise InvariantViolation("no state is reachable from all others")
        lo = finite.min()
        idx = np.flatnonzero(gamma <= lo + tol)
        return idx, gamma

    def zero_resistance_predecessors(self, targets) -> np.ndarray:
        """States with a zero-resistance directed path into ``targets``."""
        zero = self.edge_resistances <= RES_TOL
        t = self.edge_tails[zero]
        h = self.edge_heads[zero]
        reach = np.zeros(self.n_states, dtype=bool)
        reach[list(targets)] = True
        frontier = True
        while frontier:
            hits = reach[h] & ~reach[t]
            frontier = bool(hits.any())
            if frontier:
                reach[t[hits]] = True
        return np.flatnonzero(reach)

    # -- stationary behaviour ----------------------------------------

    def closed_class(self) -> np.ndarray:
        """The unique closed communicating class of the positive-
        probability pattern (rate-independent for rates in (0, 1))."""
        if self._closed is not None:
            return self._closed
        data = np.ones(self.edge_tails.size, dtype=np.int8)
        adj = sp.coo_matrix(
            (data, (self.edge_tails, self.edge_heads)),
            shape=(self.n_states, self.n_states),
        ).tocsr()
        n_comp, labels = connected_components(adj, directed=True, connection="strong")
        leaves = np.zeros(n_comp, dtype=bool)
        cross = labels[self.edge_tails] != labels[self.edge_heads]
        leaves[labels[self.edge_tails[cross]]] = True
        closed = [cid for cid in range(n_comp) if not leaves[cid]]
        if len(closed) != 1:
            raise InvariantViolation(
                f"expected one closed communicating class, found {len(closed)}"
            )
        self._closed = np.flatnonzero(labels == closed[0])
        return self._closed

    def stationary_distribution(self, eps: float) -> np.ndarray:
        """Exact stationary law at rate ``eps`` (zeros off the closed
        class), solved by GTH elimination for numerical safety."""
        cls = self.closed_class()
        mat = self.transition_matrix(eps)
        sub = mat[np.ix_(cls, cls)]
        pi_sub = _gth_solve(sub)
        pi = np.zeros(self.n_states)
        pi[cls] = pi_sub
        residual = float(np.max(np.abs(pi @ mat - pi)))
        if residual > 1e-9:
            raise InvariantViolation(f"stationary residual too large ({residual:g})")
        return pi

    @staticmethod
    def ergodic_coefficient(mat: np.ndarray) -> float:
        """Dobrushin coefficient: max over state pairs of the total-
        variation distance between their rows."""
        m = np.asarray(mat, dtype=float)
        worst = 0.0
        for a in range(m.shape[0] - 1):
            d = 0.5 * np.abs(m[a + 1 :] - m[a]).sum(axis=1).max()
            if d > worst:
                worst = float(d)
        return worst

    def contraction_factor(self, eps: float) -> float:
        """Per-window total-variation contraction factor bound."""
        return 1.0 - eps ** ((self.c + 1.0) * self._n * self.k)

    def mixing_time_bound(self, eps: float, zeta: float) -> float:
        """Slots after which every start is within ``zeta`` of the
        stationary law."""
        if not 0.0 < zeta < 1.0:
            raise ConfigError("mixing tolerance must lie in (0, 1)")
        if not 0.0 < eps < 0.5:
            raise ConfigError("the mixing bound needs a rate in (0, 0.5)")
        if self.kind == "cnum":
            return math.log(1.0 / zeta) / eps ** ((self.c + 1.0) * self._n)
        blocks = math.ceil(
            math.log(1.0 / zeta)
            / (self.k * eps ** ((self.c + 1.0) * self._n * self.k))
        )
        return float(blocks * self.k)

    def tv_bound(self, eps: float, t) -> np.ndarray:
        """Geometric total-variation envelope at the given slot counts."""
        t = np.asarray(t, dtype=np.int64)
        return self.contraction_factor(eps) ** (t // self.k)

    def tv_distance_at(self, eps: float, ts) -> np.ndarray:
        """Exact worst-start total-variation distance to stationarity at
        selected slot counts (matrix powers, so large t is fine)."""
        mat = self.transition_matrix(eps)
        pi = self.stationary_distribution(eps)
        out = np.empty(len(ts), dtype=float)
        for j, t in enumerate(ts):
            mt = np.linalg.matrix_power(mat, int(t))
            out[j] = 0.5 * np.abs(mt - pi).sum(axis=1).max()
        return out

    def tv_distance_curve(self, eps: float, t_max: int) -> np.ndarray:
        """Exact worst-start total-variation distance for t = 0..t_max."""
        mat = self.transition_matrix(eps)
        pi = self.stationary_distribution(eps)
        cur = np.eye(self.n_states)
        out = np.empty(t_max + 1, dtype=float)
        for t in range(t_max + 1):
            out[t] = 0.5 * np.abs(cur - pi).sum(axis=1).max()
            if t < t_max:
                cur = cur @ mat
        return out

    # -- aggregate observables ---------------------------------------

    def mass(self, pi: np.ndarray, predicate: Callable[[int], bool]) -> float:
        return float(sum(pi[i] for i in range(self.n_states) if predicate(i)))

    def stationary_service(self, pi: np.ndarray) -> np.ndarray:
        """Expected per-node payoff of the newest window entry under pi."""
        newest = np.array([st.history[-1] for st in self.states])
        return pi @ self.env.payoffs[newest]

    def dual_diagnostics(self, eps: float, frame_service=None) -> dict:
        """Price-driven chain diagnostics at frozen prices.

        Returns the dual value d(lam), the subgradient error delta(lam)
        (max-weight score minus the stationary expected priced payoff)
        and, when a frame's observed per-node service rates are given,
        the finite-frame error e = sum_i lam_i (s_i(lam) - s_i(frame)).
        """
        if self.kind != "cnum":
            raise ConfigError("dual diagnostics apply to the price-driven chain")
        pi = self.stationary_distribution(eps)
        service = self.stationary_service(pi)
        targets = np.array(
            [flow_control_solve(s, float(l)) for s, l in zip(self.u_specs, self.lam)]
        )
        d_val = dual_value(self.env, self.lam, self.u_specs)
        _, max_weight = max_weight_oracle(self.env, self.lam)
        delta = max_weight - float(self.lam @ service)
        out = {
            "lam": self.lam.copy(),
            "dual_value": d_val,
            "service": service,
            "targets": targets,
            "max_weight": max_weight,
            "subgradient_error": delta,
        }
        if frame_service is not None:
            fs = np.asarray(frame_service, dtype=float)
            out["frame_error"] = float(self.lam @ (service - fs))
        return out

    # -- export -------------------------------------------------------

    def resistance_graph_dot(self) -> str:
        """Graphviz text of the resistance digraph (edge labels are
        resistances; zero-resistance edges drawn bold)."""
        lines = ["digraph resistance {", "  rankdir=LR;"]
        for idx in range(self.n_states):
            lines.append(f'  s{idx} [label="{self.state_label(idx)}"];')
        for t, h, r in zip(self.edge_tails, self.edge_heads, self.edge_resistances):
            style = ' style=bold' if r <= RES_TOL else ""
            lines.append(f'  s{t} -> s{h} [label="{r:.4g}"{style}];')
        lines.append("}")
        return "\n".join(lines)


def _gth_solve(mat: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by
    Grassmann-Taksar-Heyman elimination (no subtractions, so the result
    stays accurate even with tiny transition probabilities)."""
    a = np.array(mat, dtype=float)
    m = a.shape[0]
    if m == 1:
        return np.ones(1)
    for kk in range(m - 1):
        scale = a[kk, kk + 1 :].sum()
        if scale <= 0.0:
            raise InvariantViolation("stationary solve hit a reducible block")
        a[kk + 1 :, kk] /= scale
        a[kk + 1 :, kk + 1 :] += np.outer(a[kk + 1 :, kk], a[kk, kk + 1 :])
    x = np.zeros(m)
    x[m - 1] = 1.0
    for kk in range(m - 2, -1, -1):
        x[kk] = a[kk + 1 :, kk] @ x[kk + 1 :]
    return x / x.sum()
