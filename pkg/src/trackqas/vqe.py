"""VQE cost, ADAM fine-tuning with parameter-shift gradients, and readout."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .statevector import (
    Circuit,
    QuantumState,
    expectation,
    expectation_shift_gradient,
    parameter_shift_grad,
    run,
)
from .toy_detector import Event

FLAT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    max_iters: int = 200
    grad_tol: float = 1e-6

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")


@dataclass
class VqeOutcome:
    circuit: Circuit
    final_cost: float
    cost_history: list[float]
    prediction: np.ndarray
    iters: int = 0

    def to_dict(self) -> dict:
        return {
            "final_cost": self.final_cost,
            "iters": self.iters,
            "prediction": [int(p) for p in self.prediction],
            "circuit": self.circuit.to_text(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class AdamTrace:
    circuit: Circuit
    best_cost: float
    history: list[float] = field(default_factory=list)
    iters: int = 0


def gap_round(values: np.ndarray) -> np.ndarray:
    """Binarise by the largest gap in the sorted magnitudes.

    Entries at or above the gap map to 1.  A flat magnitude profile has no
    gap and yields all zeros.
    """
    mag = np.abs(np.asarray(values))
    norm = np.linalg.norm(mag)
    if norm == 0:
        return np.zeros(mag.size, dtype=np.int8)
    mag = mag / norm
    ordered = np.sort(mag)[::-1]
    if ordered[0] - ordered[-1] <= FLAT_TOLERANCE:
        return np.zeros(mag.size, dtype=np.int8)
    k = int(np.argmax(ordered[:-1] - ordered[1:]))
    return (mag >= ordered[k]).astype(np.int8)


def readout_solution(state: QuantumState, event: Event) -> np.ndarray:
    if state.amplitudes.size != event.n_segments:
        raise ValueError(
            f"state dimension {state.amplitudes.size} != segment count {event.n_segments}")
    return gap_round(state.amplitudes)


def vqe_cost(circuit: Circuit, h: np.ndarray) -> float:
    if h.shape[0] != 2 ** circuit.n_qubits:
        raise ValueError(f"Hamiltonian dim {h.shape[0]} does not match {circuit.n_qubits} qubits")
    return expectation(run(circuit), h)


def shift_gradient(circuit: Circuit, cost: Callable[[Circuit], float]) -> np.ndarray:
    return np.array([parameter_shift_grad(circuit, cost, k)
                     for k in range(circuit.n_parameters())])


def vqe_gradient(circuit: Circuit, h: np.ndarray) -> np.ndarray:
    """Shift-rule gradient of ``<H>``, all parameters in one sweep."""
    return expectation_shift_gradient(circuit, h)[1]


def adam_minimize(
    circuit: Circuit,
    cost: Callable[[Circuit], float],
    cfg: AdamConfig,
    gradient: Callable[[Circuit], np.ndarray] | None = None,
) -> AdamTrace:
    """ADAM over all rotation angles, keeping the best parameters ever seen."""
    gradient = gradient or (lambda c: shift_gradient(c, cost))
    theta = circuit.parameters()
    first = cost(circuit)
    trace = AdamTrace(circuit=circuit, best_cost=first, history=[first])
    if theta.size == 0:
        return trace
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    current = circuit
    for t in range(1, cfg.max_iters + 1):
        g = gradient(current)
        if np.abs(g).max() < cfg.grad_tol:
            break
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_hat)
        current = circuit.with_parameters(theta)
        c = cost(current)
        trace.history.append(c)
        trace.iters = t
        if c < trace.best_cost:
            trace.best_cost = c
            trace.circuit = current
    return trace


def optimize_adam(circuit: Circuit, h: np.ndarray, cfg: AdamConfig | None = None) -> VqeOutcome:
    cfg = cfg or AdamConfig()
    trace = adam_minimize(circuit, lambda c: vqe_cost(c, h), cfg,
                          gradient=lambda c: vqe_gradient(c, h))
    return VqeOutcome(
        circuit=trace.circuit,
        final_cost=trace.best_cost,
        cost_history=trace.history,
        prediction=gap_round(run(trace.circuit).amplitudes),
        iters=trace.iters,
    )


def adam_config_from_dict(doc: dict | None) -> AdamConfig:
    return AdamConfig(**(doc or {}))


def adam_config_to_dict(cfg: AdamConfig) -> dict:
    return asdict(cfg)
