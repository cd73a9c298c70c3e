import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trackqas.hamiltonians import build_vqe_hamiltonian, build_vqls_system, classical_ground_state
from trackqas.mcts import (
    ACTION_KINDS,
    SearchConfig,
    SearchNode,
    _Search,
    allowed_children,
    apply_action,
    level_allowances,
    reward_vqe,
    reward_vqls,
    sample_action,
    search,
    ucb_value,
)
from trackqas.statevector import Circuit, Gate, hadamard_layer, rotation
from trackqas.toy_detector import generate_event
from trackqas.vqls import make_problem

from conftest import random_circuit


def test_ucb_unvisited():
    assert ucb_value(0.0, 0, 5, 0.4) == math.inf


def test_ucb_example():
    assert ucb_value(1.0, 2, 4, 0.4) == pytest.approx(0.5 + 0.4 * math.sqrt(math.log(4) / 2))
    assert ucb_value(1.0, 2, 4, 0.4) == pytest.approx(0.8330, abs=1e-4)


def test_ucb_no_exploration():
    stats = [(3.0, 4), (1.0, 1), (5.0, 10)]
    by_ucb = max(range(3), key=lambda i: ucb_value(*stats[i], 15, 0.0))
    assert by_ucb == max(range(3), key=lambda i: stats[i][0] / stats[i][1])


@pytest.mark.parametrize("visits,beta,expected", [(1, 1.0, 1), (100, 1.0, 4), (1, 2.0, 2)])
def test_progressive_widening(visits, beta, expected):
    node = SearchNode(hadamard_layer(2), visits=visits)
    assert allowed_children(node, SearchConfig(beta_pw=beta)) == expected


def test_always_add():
    cfg = SearchConfig(p_actions=(1, 0, 0, 0))
    rng = np.random.default_rng(0)
    c = random_circuit(3, 10, rng)
    assert {sample_action(c, cfg, rng).kind for _ in range(200)} == {"Add"}


def test_change_angle_resampled_without_parameters():
    cfg = SearchConfig(p_actions=(0.0, 0.0, 1.0, 0.0))
    c = hadamard_layer(2).append(Gate("CX", target=1, controls=((0, 1),)))
    rng = np.random.default_rng(1)
    kinds = {sample_action(c, cfg, rng).kind for _ in range(50)}
    assert "ChangeAngle" not in kinds and kinds


def test_action_frequencies_uniform():
    cfg = SearchConfig(p_actions=(0.25, 0.25, 0.25, 0.25), max_depth=100)
    rng = np.random.default_rng(7)
    c = random_circuit(3, 30, rng)
    n = 10_000
    counts = Counter(sample_action(c, cfg, rng).kind for _ in range(n))
    sigma = math.sqrt(n * 0.25 * 0.75)
    for kind in ACTION_KINDS:
        assert abs(counts[kind] - n / 4) <= 3 * sigma


def test_hadamard_layer_protected():
    cfg = SearchConfig(p_actions=(0.0, 0.5, 0.0, 0.5))
    rng = np.random.default_rng(3)
    c = hadamard_layer(3).append(rotation("RZ", 0, 0.1))
    for _ in range(100):
        out = apply_action(c, sample_action(c, cfg, rng))
        assert out.gates[:3] == c.gates[:3]


def test_add_blocked_at_depth_cap():
    cfg = SearchConfig(max_depth=5, p_actions=(1, 0, 0, 0))
    c = hadamard_layer(2).append(rotation("RX", 0, 0.1), rotation("RX", 1, 0.1), rotation("RX", 0, 0.1))
    rng = np.random.default_rng(0)
    assert all(sample_action(c, cfg, rng).kind != "Add" for _ in range(100))


def test_reward_vqe_ground_state(event_8):
    from trackqas.statevector import Gate as G
    h = build_vqe_hamiltonian(event_8)
    e, v = classical_ground_state(h)
    prep = Circuit(3, (G("PREP", qubits=(0, 1, 2), amplitudes=tuple(v)),))
    assert reward_vqe(prep, h) == pytest.approx(-e, abs=1e-10)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert reward_vqe(random_circuit(3, 8, rng), h) <= -e + 1e-10


def test_reward_vqe_identity(rng):
    assert reward_vqe(random_circuit(2, 6, rng), np.eye(4)) == pytest.approx(-1.0)


def test_reward_vqe_reverses_cost(rng, event_8):
    from trackqas.vqe import vqe_cost
    h = build_vqe_hamiltonian(event_8)
    a, b = random_circuit(3, 6, rng), random_circuit(3, 6, rng)
    assert (reward_vqe(a, h) > reward_vqe(b, h)) == (vqe_cost(a, h) < vqe_cost(b, h))


def test_reward_vqls_range(event_8):
    from trackqas.hamiltonians import LinearSystem
    ident = make_problem(LinearSystem(np.eye(8), np.ones(8), 0, 1, 0))
    assert reward_vqls(hadamard_layer(3), ident) == pytest.approx(1.0)
    z = make_problem(LinearSystem(np.diag([1.0, -1.0]), np.ones(2), 0, 1, 0))
    assert reward_vqls(hadamard_layer(1), z) == pytest.approx(math.exp(-1), abs=1e-12)
    assert math.exp(-1) == pytest.approx(0.3679, abs=1e-4)


def test_budget_one_returns_root(event_8):
    h = build_vqe_hamiltonian(event_8)
    res = search(lambda c: reward_vqe(c, h), 3, SearchConfig(budget=1))
    assert res.best_circuit == hadamard_layer(3)
    assert res.best_reward == pytest.approx(reward_vqe(hadamard_layer(3), h))
    assert res.evaluations == 1


def test_gate_count_reward():
    res = search(lambda c: -float(c.depth), 2, SearchConfig(budget=300, seed=4))
    assert res.best_circuit.depth <= 2
    rewards = [r for _, r in res.reward_trace]
    assert rewards == sorted(rewards)


def test_search_beats_uniform_start(event_8):
    h = build_vqe_hamiltonian(event_8)
    res = search(lambda c: reward_vqe(c, h), 3, SearchConfig(budget=10_000, seed=0))
    assert res.best_reward >= reward_vqe(hadamard_layer(3), h)
    assert res.best_reward == pytest.approx(reward_vqe(res.best_circuit, h))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 12))
def test_depth_cap_and_monotone_trace(seed, cap):
    h = build_vqe_hamiltonian(generate_event(2, 3, seed % 50))
    seen = []

    def reward(c):
        seen.append(c.depth)
        return reward_vqe(c, h)

    res = search(reward, 3, SearchConfig(budget=200, max_depth=cap, seed=seed))
    assert max(seen) <= cap
    rewards = [r for _, r in res.reward_trace]
    assert all(a <= b for a, b in zip(rewards, rewards[1:]))


def _all_nodes(root):
    out, stack = [], [root]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(ch for _, ch in node.children)
    return out


def test_backpropagation_conserves_visits(event_8):
    h = build_vqe_hamiltonian(event_8)
    s = _Search(lambda c: reward_vqe(c, h), 3, SearchConfig(seed=2), None)
    root = SearchNode(hadamard_layer(3), visits=1)
    root.reward_cache = root.cumulative_reward = s.evaluate(root.circuit)
    for _ in range(60):
        before = {id(n): n.visits for n in _all_nodes(root)}
        s.simulate(root)
        after = _all_nodes(root)
        changed = [n for n in after if n.visits != before.get(id(n), 0)]
        assert all(n.visits - before.get(id(n), 0) == 1 for n in changed)
        assert root in changed
        # changed nodes form one root-to-leaf chain
        depth_of = {}
        stack = [(root, 0)]
        while stack:
            node, d = stack.pop()
            depth_of[id(node)] = d
            stack.extend((ch, d + 1) for _, ch in node.children)
        assert sorted(depth_of[id(n)] for n in changed) == list(range(len(changed)))


def test_determinism(event_8):
    h = build_vqe_hamiltonian(event_8)
    cfg = SearchConfig(budget=500, seed=11)
    a = search(lambda c: reward_vqe(c, h), 3, cfg)
    b = search(lambda c: reward_vqe(c, h), 3, cfg)
    assert a.to_json() == b.to_json()
    assert a.log_text() == b.log_text()


def test_evaluation_count_and_levels():
    assert level_allowances(100, 50) == [2] * 50
    assert level_allowances(103, 50) == [5] + [2] * 49
    res = search(lambda c: 0.0, 2, SearchConfig(budget=100, rollout_depth=0))
    assert res.evaluations == 100


def test_reward_errors_carry_context():
    def bad(c):
        if c.depth > 2:
            raise ZeroDivisionError("boom")
        return 0.0

    with pytest.raises(RuntimeError, match="evaluation"):
        search(bad, 2, SearchConfig(budget=50))


def test_vqls_search_runs():
    prob = make_problem(build_vqls_system(generate_event(2, 3, seed=0)))
    res = search(lambda c: reward_vqls(c, prob), 3, SearchConfig(budget=200, seed=1))
    assert 0 < res.best_reward <= 1


def test_tune_on_eval_uses_tuner(event_8):
    h = build_vqe_hamiltonian(event_8)
    calls = []

    def tuner(c):
        calls.append(c)
        return c

    search(lambda c: reward_vqe(c, h), 3, SearchConfig(budget=20), tuner=tuner)
    assert not calls
    search(lambda c: reward_vqe(c, h), 3, SearchConfig(budget=20, tune_on_eval=True), tuner=tuner)
    assert len(calls) == 19


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        SearchConfig(p_actions=(0.5, 0.5, 0.5, 0.0))
    cfg = SearchConfig(budget=77, c_ucb=0.1)
    assert SearchConfig.from_dict(cfg.to_dict()) == cfg


def test_depth_cap_smaller_than_start():
    with pytest.raises(ValueError):
        search(lambda c: 0.0, 4, SearchConfig(max_depth=3))
    res = search(lambda c: 1.0, 3, SearchConfig(max_depth=3, budget=20))
    assert res.best_circuit == hadamard_layer(3) and res.evaluations == 1
