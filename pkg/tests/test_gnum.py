import numpy as np
import pytest

from ucnum import GNumConfig, run_gnum, PerturbedChain
from ucnum.errors import ConfigError
from ucnum.games import UtilitySpec, random_interior_game
from ucnum.gnum import GNumNodeState, gnum_action_update, gnum_satisfaction_update


class FixedDraw:
    """Stand-in rng producing a scripted sequence of uniforms."""

    def __init__(self, *values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


# ---------------------------------------------------------------------------
# config validation

def test_config_validation(benchmark_env):
    good = GNumConfig(epsilon=0.1, horizon=100, k=2, c=3.0)
    assert good.resolve(benchmark_env).c == 3.0
    assert GNumConfig(epsilon=0.1, horizon=100).resolve(benchmark_env).c == 3.0
    for bad in (
        GNumConfig(epsilon=0.0, horizon=100),
        GNumConfig(epsilon=0.5, horizon=100),
        GNumConfig(epsilon=0.1, horizon=100, c=2.0),
        GNumConfig(epsilon=0.1, horizon=100, k=0),
        GNumConfig(epsilon=0.1, horizon=1, k=2),
        GNumConfig(epsilon=0.1, horizon=100, record_stride=0),
    ):
        with pytest.raises(ConfigError):
            bad.resolve(benchmark_env)


# ---------------------------------------------------------------------------
# single-node updates

def test_discontent_action_is_uniform(benchmark_env):
    cfg = GNumConfig(epsilon=0.1, horizon=10, c=3.0).resolve(benchmark_env)
    state = GNumNodeState(action_window=[1], payoff_window=[0.5], content=False)
    picks = [
        gnum_action_update(state, 3, cfg, FixedDraw(u))
        for u in (0.0, 0.2, 0.4, 0.7, 0.99)
    ]
    assert picks == [0, 0, 1, 2, 2]


def test_content_action_branch_probabilities(benchmark_env):
    # eps=0.1, c=3 over three actions: repeat 0.999, alternatives 0.0005 each
    cfg = GNumConfig(epsilon=0.1, horizon=10, c=3.0).resolve(benchmark_env)
    state = GNumNodeState(action_window=[1], payoff_window=[0.5], content=True)
    assert gnum_action_update(state, 3, cfg, FixedDraw(0.998999)) == 1
    assert gnum_action_update(state, 3, cfg, FixedDraw(0.99925)) == 0
    assert gnum_action_update(state, 3, cfg, FixedDraw(0.99975)) == 2
    # eps -> 0 means deterministic repeat
    tiny = GNumConfig(epsilon=1e-9, horizon=10, c=3.0).resolve(benchmark_env)
    assert gnum_action_update(state, 3, tiny, FixedDraw(1 - 1e-12)) == 1


def test_satisfaction_certain_branch(benchmark_env):
    cfg = GNumConfig(epsilon=0.1, horizon=10, k=1, c=3.0).resolve(benchmark_env)
    u = UtilitySpec(kind="log1p")
    state = GNumNodeState(action_window=[0], payoff_window=[0.3], content=True)
    # repeated action, identical payoff: content regardless of the draw
    assert gnum_satisfaction_update(state, 0, 0.3, u, cfg, FixedDraw(1 - 1e-12))
    # same action but payoff moved: falls through to the random branch
    expo = 1.0 - u.normalized(0.9)
    thresh = cfg.epsilon**expo
    assert gnum_satisfaction_update(state, 0, 0.9, u, cfg, FixedDraw(thresh * 0.99))
    assert not gnum_satisfaction_update(state, 0, 0.9, u, cfg, FixedDraw(thresh * 1.01))


def test_satisfaction_discontent_node_uses_random_branch(benchmark_env):
    cfg = GNumConfig(epsilon=0.2, horizon=10, k=2, c=3.0).resolve(benchmark_env)
    u = UtilitySpec(kind="log1p")
    state = GNumNodeState(action_window=[0, 1], payoff_window=[0.2, 0.4], content=False)
    # mean of the refreshed window (0.4, 0.8)
    expo = 1.0 - u.normalized(0.6)
    thresh = cfg.epsilon**expo
    assert gnum_satisfaction_update(state, 0, 0.8, u, cfg, FixedDraw(thresh * 0.99))
    assert not gnum_satisfaction_update(state, 0, 0.8, u, cfg, FixedDraw(thresh * 1.01))


def test_satisfaction_peak_payoff_forces_content(benchmark_env):
    # normalized utility of a full-rate window is 1, so the exponent is 0
    cfg = GNumConfig(epsilon=0.1, horizon=10, k=1, c=3.0).resolve(benchmark_env)
    u = UtilitySpec(kind="log1p")
    state = GNumNodeState(action_window=[1], payoff_window=[0.2], content=False)
    assert gnum_satisfaction_update(state, 1, 1.0, u, cfg, FixedDraw(1 - 1e-12))


# ---------------------------------------------------------------------------
# whole runs

def test_run_warmup_and_invariants(benchmark_env):
    tr = run_gnum(benchmark_env, GNumConfig(epsilon=0.1, horizon=5000, k=3, c=3.0, seed=4))
    assert tr.algo == "gnum"
    assert tr.meta["window_check_disagreements"] == 0
    # warm-up slots are forced discontent
    for i in range(2):
        assert np.all(tr.data[f"content_{i}"][:3] == 0)
    assert np.all(tr.data["slot"] == np.arange(1, 5001))
    occ = np.asarray(tr.meta["profile_occupation"])
    assert occ.sum() == pytest.approx(1.0)
    assert 0.0 <= tr.meta["all_content_fraction"] <= 1.0
    mean_final = np.asarray(tr.meta["final_mean_payoff"])
    for i in range(2):
        assert mean_final[i] == pytest.approx(tr.data[f"payoff_{i}"].mean())
        assert mean_final[i] == pytest.approx(tr.data[f"mean_payoff_{i}"][-1])


def test_run_is_deterministic(benchmark_env):
    cfg = GNumConfig(epsilon=0.15, horizon=3000, k=2, c=3.0, seed=9)
    a = run_gnum(benchmark_env, cfg)
    b = run_gnum(benchmark_env, cfg)
    for col in a.columns:
        assert np.array_equal(a.data[col], b.data[col])
    c = run_gnum(benchmark_env, GNumConfig(epsilon=0.15, horizon=3000, k=2, c=3.0, seed=10))
    assert any(
        not np.array_equal(a.data[col], c.data[col]) for col in ("action_0", "action_1")
    )


def test_record_stride_thins_trace(benchmark_env):
    tr = run_gnum(
        benchmark_env,
        GNumConfig(epsilon=0.1, horizon=1000, c=3.0, seed=1, record_stride=100),
    )
    assert len(tr.data["slot"]) == 10
    assert tr.data["slot"][0] == 1
    assert np.all(np.diff(tr.data["slot"]) == 100)


def test_state_frequencies_cover_run(benchmark_env):
    cfg = GNumConfig(epsilon=0.1, horizon=20_000, k=2, c=3.0, seed=2, count_states=True)
    tr = run_gnum(benchmark_env, cfg)
    freqs = np.asarray(tr.meta["state_frequencies"])
    assert freqs.shape == (4**2 * 4,)
    assert freqs.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(freqs >= 0.0)


def test_empirical_occupation_matches_exact_chain():
    """Long-run window-state frequencies track the exact stationary law."""
    rng = np.random.default_rng(3)
    env = random_interior_game(rng, (2, 2))
    eps, c = 0.2, 3.0
    tr = run_gnum(
        env,
        GNumConfig(epsilon=eps, horizon=4_000_000, k=1, c=c, seed=0,
                   record_stride=100_000, count_states=True),
    )
    emp = np.asarray(tr.meta["state_frequencies"])
    chain = PerturbedChain(env, kind="gnum", k=1, c=c)
    pi = chain.stationary_distribution(eps)
    assert 0.5 * np.abs(emp - pi).sum() < 0.02
