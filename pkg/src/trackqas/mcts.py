"""Monte Carlo Tree Search over circuit edits.

Each node holds a circuit; edges are random edits (add, swap, change angle,
delete).  Selection uses UCB1, progressive widening caps the number of
children at ``ceil(beta * N**alpha)``, and the search commits one level at a
time.  The returned circuit is the best one evaluated anywhere in the search.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .statevector import Circuit, Gate, cx_gate, hadamard_layer, rotation
from .vqe import vqe_cost
from .vqls import VqlsProblem, vqls_cost

ACTION_KINDS = ("Add", "Swap", "ChangeAngle", "Delete")
GATE_SET = ("CX", "RX", "RY", "RZ")
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 10_000
    c_ucb: float = 0.4
    p_actions: tuple[float, float, float, float] = (0.5, 0.2, 0.2, 0.1)
    delta_theta: float = 0.2
    alpha_pw: float = 0.3
    beta_pw: float = 1.0
    max_depth: int = 50
    rollout_depth: int = 5
    seed: int = 0
    tune_on_eval: bool = False
    tune_iters: int = 10

    def __post_init__(self):
        object.__setattr__(self, "p_actions", tuple(float(p) for p in self.p_actions))
        if len(self.p_actions) != 4 or abs(sum(self.p_actions) - 1.0) > 1e-9 or min(self.p_actions) < 0:
            raise ValueError(f"p_actions must be a probability 4-vector, got {self.p_actions}")
        if not 0 < self.alpha_pw < 1:
            raise ValueError("alpha_pw must lie in (0, 1)")
        if self.beta_pw <= 0:
            raise ValueError("beta_pw must be positive")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_actions"] = list(self.p_actions)
        return d

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SearchConfig":
        doc = dict(doc or {})
        if "p_actions" in doc:
            doc["p_actions"] = tuple(doc["p_actions"])
        return cls(**doc)


@dataclass(frozen=True)
class ActionSpec:
    kind: str
    gate: Gate | None = None
    position: int | None = None
    param_index: int | None = None
    delta: float = 0.0


@dataclass(eq=False)
class SearchNode:
    circuit: Circuit
    visits: int = 0
    cumulative_reward: float = 0.0
    reward_cache: float = float("nan")
    children: list[tuple[ActionSpec, "SearchNode"]] = field(default_factory=list)

    @property
    def mean_reward(self) -> float:
        return self.cumulative_reward / self.visits if self.visits else float("-inf")


@dataclass
class SearchResult:
    best_circuit: Circuit
    best_reward: float
    evaluations: int
    reward_trace: list[tuple[int, float]]
    committed_circuit: Circuit
    log: list[tuple[int, int, float, float]] = field(default_factory=list, repr=False)

    def log_text(self) -> str:
        return "".join(f"{i}\t{d}\t{r!r}\t{b!r}\n" for i, d, r, b in self.log)

    def to_dict(self) -> dict:
        return {
            "best_reward": self.best_reward,
            "evaluations": self.evaluations,
            "total_gates": self.best_circuit.depth,
            "parameterized_gates": self.best_circuit.n_parameters(),
            "n_qubits": self.best_circuit.n_qubits,
            "best_circuit": self.best_circuit.to_text(),
            "committed_circuit": self.committed_circuit.to_text(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ucb_value(q: float, n: int, parent_n: int, c: float) -> float:
    if n == 0:
        return math.inf
    return q / n + c * math.sqrt(math.log(parent_n) / n)


def allowed_children(node: SearchNode, cfg: SearchConfig) -> int:
    return math.ceil(cfg.beta_pw * node.visits ** cfg.alpha_pw)


def _random_gate(n_qubits: int, rng: np.random.Generator) -> Gate:
    kinds = GATE_SET if n_qubits > 1 else GATE_SET[1:]
    kind = kinds[rng.integers(len(kinds))]
    if kind == "CX":
        control = int(rng.integers(n_qubits))
        target = int(rng.integers(n_qubits - 1))
        return cx_gate(control, target + (target >= control))
    return rotation(kind, int(rng.integers(n_qubits)), float(rng.uniform(-math.pi, math.pi)))


def _feasible(kind: str, circuit: Circuit, cfg: SearchConfig) -> bool:
    editable = circuit.depth - circuit.n_qubits
    if kind == "Add":
        return circuit.depth < cfg.max_depth
    if kind in ("Swap", "Delete"):
        return editable > 0
    return circuit.n_parameters() > 0


def sample_action(circuit: Circuit, cfg: SearchConfig, rng: np.random.Generator) -> ActionSpec:
    """Draw one edit.  The leading Hadamard layer is never swapped or deleted."""
    kind = None
    for _ in range(MAX_RESAMPLES):
        k = ACTION_KINDS[min(3, int(np.searchsorted(np.cumsum(cfg.p_actions), rng.random(), side="right")))]
        if _feasible(k, circuit, cfg):
            kind = k
            break
    if kind is None:
        kind = next((k for k in ACTION_KINDS if _feasible(k, circuit, cfg)), None)
        if kind is None:
            raise RuntimeError("no feasible action for circuit")

    n, fixed = circuit.n_qubits, circuit.n_qubits
    if kind == "Add":
        return ActionSpec("Add", gate=_random_gate(n, rng), position=circuit.depth)
    if kind == "Swap":
        pos = fixed + int(rng.integers(circuit.depth - fixed))
        return ActionSpec("Swap", gate=_random_gate(n, rng), position=pos)
    if kind == "Delete":
        return ActionSpec("Delete", position=fixed + int(rng.integers(circuit.depth - fixed)))
    k = int(rng.integers(circuit.n_parameters()))
    return ActionSpec("ChangeAngle", param_index=k, delta=float(rng.normal(0.0, cfg.delta_theta)))


def apply_action(circuit: Circuit, action: ActionSpec) -> Circuit:
    gates = circuit.gates
    if action.kind == "Add":
        return Circuit.trusted(circuit.n_qubits, gates + (action.gate,))
    if action.kind == "Swap":
        p = action.position
        return Circuit.trusted(circuit.n_qubits, gates[:p] + (action.gate,) + gates[p + 1:])
    if action.kind == "Delete":
        p = action.position
        return Circuit.trusted(circuit.n_qubits, gates[:p] + gates[p + 1:])
    theta = circuit.parameters()
    theta[action.param_index] += action.delta
    return circuit.with_parameters(theta)


def reward_vqe(circuit: Circuit, h: np.ndarray) -> float:
    return -vqe_cost(circuit, h)


def reward_vqls(circuit: Circuit, prob: VqlsProblem) -> float:
    return math.exp(-vqls_cost(circuit, prob))


class _Search:
    def __init__(self, reward, n_qubits, cfg, tuner):
        self.reward = reward
        self.cfg = cfg
        self.tuner = tuner if cfg.tune_on_eval else None
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.evaluations = 0
        self.best_reward = -math.inf
        self.best_circuit = hadamard_layer(n_qubits)
        self.trace: list[tuple[int, float]] = []
        self.log: list[tuple[int, int, float, float]] = []

    def evaluate(self, circuit: Circuit) -> float:
        try:
            r = float(self.reward(circuit))
        except Exception as exc:
            raise RuntimeError(
                f"reward failed at evaluation {self.evaluations} on circuit:\n{circuit.to_text()}"
            ) from exc
        self.evaluations += 1
        if r > self.best_reward:
            self.best_reward = r
            self.best_circuit = circuit
        self.trace.append((self.evaluations, self.best_reward))
        self.log.append((self.evaluations, circuit.depth, r, self.best_reward))
        return r

    def expand(self, node: SearchNode) -> tuple[SearchNode, float]:
        action = sample_action(node.circuit, self.cfg, self.rng)
        circuit = apply_action(node.circuit, action)
        if self.tuner is not None:
            circuit = self.tuner(circuit)
        child = SearchNode(circuit)
        child.reward_cache = self.evaluate(circuit)
        node.children.append((action, child))
        value = child.reward_cache
        if self.cfg.rollout_depth > 0:
            rolled = circuit
            for _ in range(self.cfg.rollout_depth):
                rolled = apply_action(rolled, sample_action(rolled, self.cfg, self.rng))
            value = max(value, self.evaluate(rolled))
        return child, value

    def simulate(self, root: SearchNode) -> None:
        path = [root]
        node = root
        while True:
            if len(node.children) < allowed_children(node, self.cfg):
                child, value = self.expand(node)
                path.append(child)
                break
            c, parent_n = self.cfg.c_ucb, node.visits
            node = max(node.children,
                       key=lambda e: ucb_value(e[1].cumulative_reward, e[1].visits, parent_n, c))[1]
            path.append(node)
        for n in path:
            n.visits += 1
            n.cumulative_reward += value


def level_allowances(budget: int, levels: int) -> list[int]:
    base = budget // levels
    return [base + budget % levels] + [base] * (levels - 1)


def search(
    reward: Callable[[Circuit], float],
    n_qubits: int,
    cfg: SearchConfig | None = None,
    tuner: Callable[[Circuit], Circuit] | None = None,
) -> SearchResult:
    """Action-by-action MCTS from the Hadamard-layer circuit.

    ``cfg.budget`` counts simulations; the root evaluation is the first.
    Each simulation evaluates the expanded node and, when
    ``rollout_depth > 0``, the end of a random rollout from it.
    """
    cfg = cfg or SearchConfig()
    if cfg.max_depth < n_qubits:
        raise ValueError(f"max_depth {cfg.max_depth} cannot hold the {n_qubits}-gate Hadamard layer")
    s = _Search(reward, n_qubits, cfg, tuner)
    root = SearchNode(hadamard_layer(n_qubits))
    root.reward_cache = s.evaluate(root.circuit)
    root.visits = 1
    root.cumulative_reward = root.reward_cache

    allowances = level_allowances(cfg.budget, max(1, cfg.max_depth))
    allowances[0] -= 1
    if root.circuit.depth >= cfg.max_depth:
        # the start circuit already fills the cap: no edit is feasible
        allowances = []
    for allowance in allowances:
        for _ in range(allowance):
            s.simulate(root)
        if not root.children:
            # nothing to commit to yet; the next level keeps this root
            continue
        root = max((child for _, child in root.children), key=lambda ch: ch.mean_reward)

    return SearchResult(
        best_circuit=s.best_circuit,
        best_reward=s.best_reward,
        evaluations=s.evaluations,
        reward_trace=s.trace,
        committed_circuit=root.circuit,
        log=s.log,
    )
