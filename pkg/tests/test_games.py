import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucnum.games import (
    GameFormatError,
    GameEnvironment,
    OccupationMeasure,
    UtilitySpec,
    average_payoff,
    check_interdependence,
    evaluate_payoffs,
    load_game,
    make_game,
    random_interior_game,
    save_game,
    two_node_benchmark,
)
from helpers import decoupled_game


# ---------------------------------------------------------------------------
# utility shapes

def test_log1p_values_and_derivative():
    u = UtilitySpec(kind="log1p")
    assert u.value(0.0) == 0.0
    assert u.value(1.0) == pytest.approx(np.log(2.0))
    assert u.derivative(0.0) == pytest.approx(1.0)
    assert u.v_bound == pytest.approx(1.0)
    assert u.lambda_max == pytest.approx(2.0)


def test_normalized_endpoints():
    for u in (
        UtilitySpec(kind="log1p"),
        UtilitySpec(kind="log_offset", delta=0.3),
        UtilitySpec(kind="table", table=(0.0, 0.5, 0.8, 1.0)),
    ):
        assert u.normalized(0.0) == pytest.approx(0.0, abs=1e-15)
        assert u.normalized(1.0) == pytest.approx(1.0, abs=1e-15)


def test_utility_validation_errors():
    with pytest.raises(GameFormatError):
        UtilitySpec(kind="nope")
    with pytest.raises(GameFormatError):
        UtilitySpec(kind="log_offset", delta=0.0)
    with pytest.raises(GameFormatError):
        UtilitySpec(kind="table", table=(0.5,))
    with pytest.raises(GameFormatError):
        UtilitySpec(kind="table", table=(0.5, 0.2, 0.9))
    with pytest.raises(ValueError):
        UtilitySpec(kind="log1p").value(1.5)


def test_strict_concavity_flags():
    assert UtilitySpec(kind="log1p").strictly_concave
    assert UtilitySpec(kind="log_offset", delta=0.1).strictly_concave
    assert not UtilitySpec(kind="affine").strictly_concave
    assert UtilitySpec(kind="table", table=(0.0, 0.6, 0.9, 1.0)).strictly_concave
    assert not UtilitySpec(kind="table", table=(0.0, 0.3, 0.6, 1.0)).strictly_concave


@given(
    delta=st.floats(0.05, 5.0),
    a=st.floats(0.0, 1.0),
    b=st.floats(0.0, 1.0),
)
def test_normalized_monotone(delta, a, b):
    u = UtilitySpec(kind="log_offset", delta=delta)
    lo, hi = sorted((a, b))
    assert u.normalized(lo) <= u.normalized(hi) + 1e-12


@given(r=st.floats(0.001, 0.999))
def test_derivative_matches_numeric(r):
    u = UtilitySpec(kind="log_offset", delta=0.2)
    h = 1e-7
    numeric = (u.value(r + h) - u.value(r - h)) / (2 * h)
    assert u.derivative(r) == pytest.approx(numeric, rel=1e-5)


# ---------------------------------------------------------------------------
# environment structure

def test_benchmark_table(benchmark_env):
    env = benchmark_env
    assert env.n_nodes == 2
    assert env.n_actions == (2, 2)
    assert env.profile_count == 4
    assert tuple(evaluate_payoffs(env, (1, 0))) == (1.0, 0.001)
    assert tuple(evaluate_payoffs(env, (0, 1))) == (0.001, 0.8)
    assert env.profile_label((1, 0)) == "a2,a1"


def test_profile_index_roundtrip():
    rng = np.random.default_rng(5)
    env = random_interior_game(rng, (2, 3, 4))
    for idx in range(env.profile_count):
        assert env.profile_index(env.index_profile(idx)) == idx
    profiles = list(env.profiles())
    assert len(profiles) == env.profile_count
    assert profiles == sorted(profiles)


def test_environment_validation():
    u = UtilitySpec(kind="log1p")
    with pytest.raises(GameFormatError):
        GameEnvironment(action_labels=(("a",),), payoffs=np.zeros((1, 1)), utilities=(u,))
    with pytest.raises(GameFormatError):
        GameEnvironment(
            action_labels=(("a", "a"),), payoffs=np.zeros((2, 1)), utilities=(u,)
        )
    with pytest.raises(GameFormatError):
        GameEnvironment(
            action_labels=(("a", "b"),), payoffs=np.zeros((3, 1)), utilities=(u,)
        )
    with pytest.raises(GameFormatError):
        GameEnvironment(
            action_labels=(("a", "b"),),
            payoffs=np.array([[-0.1], [0.2]]),
            utilities=(u,),
        )


def test_payoff_rescaling():
    u = UtilitySpec(kind="log1p")
    env = make_game(
        (("a", "b"), ("a", "b")),
        lambda p: (4.0 * (p[0] + 1), 2.0),
        (u, u),
    )
    assert env.rescaled_by == pytest.approx(8.0)
    assert env.payoffs.max() == pytest.approx(1.0)
    assert np.all(env.payoffs <= 1.0)


# ---------------------------------------------------------------------------
# occupation measures

def test_occupation_validation():
    with pytest.raises(ValueError):
        OccupationMeasure(weights=np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        OccupationMeasure(weights=np.array([0.7, -0.2, 0.5]))
    m = OccupationMeasure(weights=np.array([0.25, 0.75]))
    assert m.weights.sum() == pytest.approx(1.0)


@settings(max_examples=40)
@given(
    t=st.floats(0.0, 1.0),
    seed=st.integers(0, 50),
)
def test_average_payoff_linear_in_mixture(t, seed):
    rng = np.random.default_rng(seed)
    env = random_interior_game(rng, (2, 2))
    w1 = rng.dirichlet(np.ones(4))
    w2 = rng.dirichlet(np.ones(4))
    mixed = average_payoff(env, t * w1 + (1 - t) * w2)
    split = t * average_payoff(env, w1) + (1 - t) * average_payoff(env, w2)
    assert np.allclose(mixed, split, atol=1e-12)


def test_average_payoff_point_mass(benchmark_env):
    w = np.zeros(4)
    w[benchmark_env.profile_index((1, 0))] = 1.0
    assert np.allclose(average_payoff(benchmark_env, w), [1.0, 0.001])
    with pytest.raises(ValueError):
        average_payoff(benchmark_env, np.ones(3) / 3)


# ---------------------------------------------------------------------------
# interdependence

def test_benchmark_is_interdependent(benchmark_env):
    ok, witness = check_interdependence(benchmark_env)
    assert ok and witness is None


def test_decoupled_game_fails_interdependence():
    ok, witness = check_interdependence(decoupled_game())
    assert not ok
    subset, profile = witness
    assert len(subset) == 1
    assert len(profile) == 2


def test_random_interior_games_are_interdependent():
    rng = np.random.default_rng(11)
    for shape in ((2, 2), (2, 3), (2, 2, 2)):
        env = random_interior_game(rng, shape)
        ok, _ = check_interdependence(env)
        assert ok


# ---------------------------------------------------------------------------
# file format

def test_save_load_roundtrip(tmp_path, benchmark_env):
    path = tmp_path / "game.json"
    save_game(benchmark_env, path)
    loaded = load_game(path)
    assert loaded.action_labels == benchmark_env.action_labels
    assert np.array_equal(loaded.payoffs, benchmark_env.payoffs)
    assert loaded.utilities == benchmark_env.utilities


def test_load_builtin_and_errors(tmp_path):
    env = load_game("builtin:two-node")
    assert env.n_nodes == 2
    with pytest.raises(GameFormatError):
        load_game("builtin:mystery")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": 2, "actions": [["a", "b"], ["a", "b"]]}))
    with pytest.raises(GameFormatError):
        load_game(bad)


def test_load_rejects_partial_table(tmp_path, benchmark_env):
    doc = benchmark_env.to_dict()
    del doc["payoffs"]["a1,a1"]
    path = tmp_path / "partial.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(GameFormatError):
        load_game(path)


def test_load_rejects_unknown_label(tmp_path, benchmark_env):
    doc = benchmark_env.to_dict()
    doc["payoffs"]["zz,a1"] = [0.1, 0.1]
    path = tmp_path / "label.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(GameFormatError):
        load_game(path)
