"""Coherent VQLS: overlap between ``A|psi>`` and ``|b>`` from ancilla statistics.

Register layout: system qubits ``0..n-1``, ancillas ``n..n+m-1``.  Ancilla
value ``l`` selects Pauli term ``l`` of the sign-folded decomposition.

    P(all qubits 0) / P(ancillas 0) = |<b|A psi>|^2 / ||A psi||^2
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonians import LinearSystem
from .pauli import NormalizedDecomposition, decompose, normalize_for_vqls
from .statevector import (
    MAX_QUBITS,
    Circuit,
    CircuitWidthError,
    Gate,
    apply_gate,
    expectation_shift_gradient,
    h_gate,
    prob_subset_zero,
    run,
)
from .vqe import AdamConfig, adam_minimize, gap_round

RANGE_SLACK = 1e-9
MIN_ANCILLA_PROB = 1e-12


class DegenerateNormalizationError(ArithmeticError):
    pass


@dataclass
class VqlsProblem:
    system: LinearSystem
    decomposition: NormalizedDecomposition
    n: int
    m: int
    _tail: np.ndarray | None = field(default=None, repr=False)
    _observables: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return self.n + self.m

    @property
    def ancillas(self) -> list[int]:
        return list(range(self.n, self.n + self.m))


def make_problem(system: LinearSystem) -> VqlsProblem:
    dim = system.dim
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"system dimension {dim} is not a power of two")
    dec = normalize_for_vqls(decompose(system.a))
    if n + dec.m > MAX_QUBITS:
        raise CircuitWidthError(
            f"coherent VQLS needs {n} system + {dec.m} ancilla qubits > {MAX_QUBITS}")
    return VqlsProblem(system=system, decomposition=dec, n=n, m=dec.m)


def _ancilla_controls(prob: VqlsProblem, l: int) -> tuple[tuple[int, int], ...]:
    return tuple((prob.n + j, (l >> j) & 1) for j in range(prob.m))


def _prep_gate(prob: VqlsProblem) -> Gate:
    return Gate("PREP", qubits=tuple(prob.ancillas),
                amplitudes=tuple(float(a) for a in prob.decomposition.amplitudes))


def _select_gates(prob: VqlsProblem) -> list[Gate]:
    gates = []
    for l, (_, word, sign) in enumerate(prob.decomposition.terms):
        controls = _ancilla_controls(prob, l)
        for k, letter in enumerate(word):
            if letter != "I":
                gates.append(Gate("MC_PAULI", target=prob.n - 1 - k, controls=controls, pauli=letter))
        if sign < 0:
            gates.append(Gate("CP_MINUS1", controls=controls))
    return gates


def _tail_gates(prob: VqlsProblem) -> list[Gate]:
    tail = _select_gates(prob)
    if prob.m:
        tail.append(_prep_gate(prob))
    tail.extend(h_gate(q) for q in range(prob.n))
    return tail


def build_coherent_circuit(ansatz: Circuit, prob: VqlsProblem) -> Circuit:
    if ansatz.n_qubits != prob.n:
        raise ValueError(f"ansatz width {ansatz.n_qubits} != system qubits {prob.n}")
    if prob.width > MAX_QUBITS:
        raise CircuitWidthError(f"coherent circuit width {prob.width} exceeds {MAX_QUBITS}")
    gates = [_prep_gate(prob)] if prob.m else []
    gates.extend(ansatz.gates)
    gates.extend(_tail_gates(prob))
    return Circuit(prob.width, tuple(gates))


def compiled_tail(prob: VqlsProblem) -> np.ndarray:
    """Ancilla-zero block of the post-ansatz circuit, shape ``(2**n, 2**n)``.

    Column ``s`` is obtained by simulating the select, un-prepare and
    Hadamard gates on ``|s>_sys (x) PREP|0>_anc``; the circuit acts linearly on
    the ansatz state, so ``block @ psi`` equals the ancilla-zero amplitudes
    of the full coherent circuit.
    """
    if prob._tail is None:
        dim = 2 ** prob.n
        anc = np.asarray(prob.decomposition.amplitudes, dtype=complex)
        tail = _tail_gates(prob)
        block = np.empty((dim, dim), dtype=complex)
        for s in range(dim):
            sys_vec = np.zeros(dim, dtype=complex)
            sys_vec[s] = 1.0
            psi = np.kron(anc, sys_vec)
            for g in tail:
                psi = apply_gate(psi, g, prob.width)
            block[:, s] = psi[:dim]
        prob._tail = block
    return prob._tail


def overlap_probabilities(ansatz: Circuit, prob: VqlsProblem, full_circuit: bool = False
                          ) -> tuple[float, float]:
    """``(P(all qubits 0), P(ancillas 0))`` for the coherent circuit."""
    if full_circuit:
        state = run(build_coherent_circuit(ansatz, prob))
        p_all = float(abs(state.amplitudes[0]) ** 2)
        return p_all, prob_subset_zero(state, prob.ancillas)
    out = compiled_tail(prob) @ run(ansatz).amplitudes
    probs = np.abs(out) ** 2
    return float(probs[0]), float(probs.sum())


def _cost_from(p_all: float, p_anc: float) -> float:
    if p_anc < MIN_ANCILLA_PROB:
        raise DegenerateNormalizationError(
            f"ancilla ground-state probability {p_anc:.3g} is below {MIN_ANCILLA_PROB}; "
            "A|psi> vanishes and the overlap ratio is undefined")
    cost = 1.0 - p_all / p_anc
    if not -RANGE_SLACK <= cost <= 1.0 + RANGE_SLACK:
        raise ArithmeticError(f"VQLS cost {cost} outside [0, 1]")
    return min(1.0, max(0.0, cost))


def vqls_cost(ansatz: Circuit, prob: VqlsProblem, full_circuit: bool = False) -> float:
    return _cost_from(*overlap_probabilities(ansatz, prob, full_circuit))


def tail_observables(prob: VqlsProblem) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian ``(M_all, M_anc)`` with ``P = <psi|M|psi>`` on the ansatz output."""
    if prob._observables is None:
        t = compiled_tail(prob)
        row = t[0]
        prob._observables = (np.outer(row.conj(), row), t.conj().T @ t)
    return prob._observables


def vqls_gradient(ansatz: Circuit, prob: VqlsProblem) -> np.ndarray:
    """Quotient rule over parameter-shift derivatives of both probabilities.

    Both probabilities are expectation values of fixed observables on the
    ansatz output, so the shift rule applies to numerator and denominator
    separately.
    """
    m_all, m_anc = tail_observables(prob)
    p_all, d_all = expectation_shift_gradient(ansatz, m_all)
    p_anc, d_anc = expectation_shift_gradient(ansatz, m_anc)
    return -(d_all * p_anc - p_all * d_anc) / (p_anc * p_anc)


def vqls_gradient_reference(ansatz: Circuit, prob: VqlsProblem) -> np.ndarray:
    """Same quotient rule, each shifted probability from a separate circuit run."""
    p_all, p_anc = overlap_probabilities(ansatz, prob)
    theta = ansatz.parameters()
    grad = np.empty(theta.size)
    for k in range(theta.size):
        plus, minus = theta.copy(), theta.copy()
        plus[k] += 0.5 * math.pi
        minus[k] -= 0.5 * math.pi
        a_p, n_p = overlap_probabilities(ansatz.with_parameters(plus), prob)
        a_m, n_m = overlap_probabilities(ansatz.with_parameters(minus), prob)
        d_all = 0.5 * (a_p - a_m)
        d_anc = 0.5 * (n_p - n_m)
        grad[k] = -(d_all * p_anc - p_all * d_anc) / (p_anc * p_anc)
    return grad


def dense_overlap(psi: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """``|<b|A psi>|^2 / (||A psi||^2 ||b||^2)`` by direct matrix algebra."""
    phi = a @ psi
    return float(abs(np.vdot(b, phi)) ** 2 / (np.vdot(phi, phi).real * np.vdot(b, b).real))


@dataclass
class VqlsOutcome:
    circuit: Circuit
    final_cost: float
    prediction: np.ndarray
    cost_history: list[float]
    iters: int
    n: int
    m: int

    @property
    def overlap(self) -> float:
        return 1.0 - self.final_cost

    def to_dict(self) -> dict:
        return {
            "final_cost": self.final_cost,
            "iters": self.iters,
            "prediction": [int(p) for p in self.prediction],
            "circuit": self.circuit.to_text(),
            "overlap": self.overlap,
            "n": self.n,
            "m": self.m,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def solve_vqls(prob: VqlsProblem, ansatz: Circuit, cfg: AdamConfig | None = None) -> VqlsOutcome:
    cfg = cfg or AdamConfig()
    trace = adam_minimize(ansatz, lambda c: vqls_cost(c, prob), cfg,
                          gradient=lambda c: vqls_gradient(c, prob))
    return VqlsOutcome(
        circuit=trace.circuit,
        final_cost=trace.best_cost,
        prediction=gap_round(run(trace.circuit).amplitudes),
        cost_history=trace.history,
        iters=trace.iters,
        n=prob.n,
        m=prob.m,
    )
