"""Exact statevector simulation of small parameterised circuits.

Basis ordering is little-endian: qubit 0 is the least significant bit of
the basis-state index.  Rotations follow ``R_P(theta) = exp(-i theta P / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_QUBITS = 16
ROTATIONS = ("RX", "RY", "RZ")
KINDS = ("H", "CX", "RX", "RY", "RZ", "CP_MINUS1", "MC_PAULI", "PREP")

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class CircuitWidthError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    """One circuit instruction.

    ``controls`` holds ``(qubit, polarity)`` pairs; for ``CX`` it is the
    single control with polarity 1.  ``PREP`` maps ``|0...0>`` on ``qubits``
    to ``amplitudes`` with a Householder reflection, which is its own
    inverse.
    """

    kind: str
    target: int | None = None
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None
    pauli: str | None = None
    qubits: tuple[int, ...] = ()
    amplitudes: tuple[float, ...] = ()

    @property
    def parameterized(self) -> bool:
        return self.kind in ROTATIONS

    def wires(self) -> tuple[int, ...]:
        ws = tuple(q for q, _ in self.controls) + self.qubits
        return ws if self.target is None else ws + (self.target,)

    def to_text(self) -> str:
        ctl = " ".join(f"q{q}:{p}" for q, p in self.controls)
        if self.kind == "H":
            return f"H q{self.target}"
        if self.kind in ROTATIONS:
            return f"{self.kind} q{self.target} {self.angle!r}"
        if self.kind == "CX":
            return f"CX q{self.controls[0][0]} q{self.target}"
        if self.kind == "MC_PAULI":
            return f"MC_PAULI {self.pauli} q{self.target} {ctl}".rstrip()
        if self.kind == "CP_MINUS1":
            return f"CP_MINUS1 {ctl}".rstrip()
        if self.kind == "PREP":
            qs = ",".join(f"q{q}" for q in self.qubits)
            return f"PREP {qs} " + ",".join(repr(float(a)) for a in self.amplitudes)
        raise ValueError(f"unknown gate kind {self.kind}")


def h_gate(q: int) -> Gate:
    return Gate("H", target=q)


def cx_gate(control: int, target: int) -> Gate:
    return Gate("CX", target=target, controls=((control, 1),))


def rotation(kind: str, q: int, angle: float) -> Gate:
    if kind not in ROTATIONS:
        raise ValueError(f"not a rotation: {kind}")
    return Gate(kind, target=q, angle=float(angle))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for w in g.wires():
                if not 0 <= w < self.n_qubits:
                    raise ValueError(f"gate {g.to_text()!r} touches qubit {w} outside width {self.n_qubits}")
            if g.target is not None and g.target in {q for q, _ in g.controls}:
                raise ValueError(f"gate {g.to_text()!r} has its target among its controls")

    @classmethod
    def trusted(cls, n_qubits: int, gates: tuple[Gate, ...]) -> "Circuit":
        """Build without wire validation; for gates already known to fit."""
        c = object.__new__(cls)
        object.__setattr__(c, "n_qubits", n_qubits)
        object.__setattr__(c, "gates", gates)
        return c

    @property
    def depth(self) -> int:
        return len(self.gates)

    def parameter_positions(self) -> list[int]:
        return [i for i, g in enumerate(self.gates) if g.parameterized]

    def parameters(self) -> np.ndarray:
        return np.array([g.angle for g in self.gates if g.parameterized], dtype=float)

    def n_parameters(self) -> int:
        return sum(1 for g in self.gates if g.parameterized)

    def with_parameters(self, theta: Sequence[float]) -> "Circuit":
        gates = list(self.gates)
        positions = self.parameter_positions()
        if len(theta) != len(positions):
            raise ValueError(f"expected {len(positions)} parameters, got {len(theta)}")
        for pos, t in zip(positions, theta):
            g = gates[pos]
            gates[pos] = Gate(g.kind, g.target, angle=float(t))
        return Circuit.trusted(self.n_qubits, tuple(gates))

    def append(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n_qubits, self.gates + tuple(gates))

    def to_text(self) -> str:
        return "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, n_qubits: int, text: str) -> "Circuit":
        return cls(n_qubits, tuple(parse_gate(line) for line in text.splitlines() if line.strip()))


def _qubit(tok: str) -> int:
    if not tok.startswith("q"):
        raise ValueError(f"bad qubit token {tok!r}")
    return int(tok[1:])


def _control(tok: str) -> tuple[int, int]:
    q, p = tok.split(":")
    return _qubit(q), int(p)


def parse_gate(line: str) -> Gate:
    tok = line.split()
    kind = tok[0]
    if kind == "H":
        return h_gate(_qubit(tok[1]))
    if kind in ROTATIONS:
        return rotation(kind, _qubit(tok[1]), float(tok[2]))
    if kind == "CX":
        return cx_gate(_qubit(tok[1]), _qubit(tok[2]))
    if kind == "MC_PAULI":
        return Gate("MC_PAULI", target=_qubit(tok[2]), pauli=tok[1],
                    controls=tuple(_control(t) for t in tok[3:]))
    if kind == "CP_MINUS1":
        return Gate("CP_MINUS1", controls=tuple(_control(t) for t in tok[1:]))
    if kind == "PREP":
        return Gate("PREP", qubits=tuple(_qubit(t) for t in tok[1].split(",")),
                    amplitudes=tuple(float(a) for a in tok[2].split(",")))
    raise ValueError(f"unknown gate line {line!r}")


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(n_qubits: int) -> QuantumState:
    psi = np.zeros(2 ** n_qubits, dtype=complex)
    psi[0] = 1.0
    return QuantumState(n_qubits, psi)


# --- gate kernels ---------------------------------------------------------

@lru_cache(maxsize=4096)
def _controlled_pairs(n: int, target: int, controls: tuple[tuple[int, int], ...]):
    idx = np.arange(2 ** n)
    keep = (idx >> target) & 1 == 0
    for q, p in controls:
        keep &= (idx >> q) & 1 == p
    lo = idx[keep]
    return lo, lo | (1 << target)


@lru_cache(maxsize=4096)
def _pattern_mask(n: int, controls: tuple[tuple[int, int], ...]) -> np.ndarray:
    idx = np.arange(2 ** n)
    keep = np.ones(2 ** n, dtype=bool)
    for q, p in controls:
        keep &= (idx >> q) & 1 == p
    return np.nonzero(keep)[0]


@lru_cache(maxsize=256)
def _householder(amplitudes: tuple[float, ...]) -> np.ndarray:
    a = np.asarray(amplitudes, dtype=float)
    a = a / np.linalg.norm(a)
    e0 = np.zeros_like(a)
    e0[0] = 1.0
    w = e0 - a
    norm = np.linalg.norm(w)
    if norm < 1e-15:
        return np.eye(len(a))
    w /= norm
    return np.eye(len(a)) - 2.0 * np.outer(w, w)


@lru_cache(maxsize=1024)
def _flip(n: int, q: int) -> np.ndarray:
    return np.arange(2 ** n) ^ (1 << q)


@lru_cache(maxsize=1024)
def _zsign(n: int, q: int) -> np.ndarray:
    """+1 where qubit ``q`` is 0, -1 where it is 1."""
    return 1.0 - 2.0 * ((np.arange(2 ** n) >> q) & 1)


@lru_cache(maxsize=1024)
def _cx_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.where((idx >> control) & 1 == 1, idx ^ (1 << target), idx)


def apply_gate(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply ``gate`` to ``psi``; returns the new amplitude vector.

    Single-qubit gates are written as ``a * psi + b * psi[flip]`` with
    per-basis-state signs, which keeps every gate to a few vector ops.
    """
    kind, q = gate.kind, gate.target
    if kind == "H":
        return (_zsign(n, q) * psi + psi[_flip(n, q)]) * _INV_SQRT2
    if kind == "RZ":
        half = 0.5 * gate.angle
        return psi * (math.cos(half) - 1j * math.sin(half) * _zsign(n, q))
    if kind == "RX":
        half = 0.5 * gate.angle
        return math.cos(half) * psi - 1j * math.sin(half) * psi[_flip(n, q)]
    if kind == "RY":
        half = 0.5 * gate.angle
        return math.cos(half) * psi - math.sin(half) * _zsign(n, q) * psi[_flip(n, q)]
    if kind == "CX":
        return psi[_cx_perm(n, gate.controls[0][0], q)]
    if kind == "MC_PAULI":
        lo, hi = _controlled_pairs(n, q, gate.controls)
        psi = psi.copy()
        if gate.pauli == "X":
            psi[lo], psi[hi] = psi[hi], psi[lo].copy()
        elif gate.pauli == "Z":
            psi[hi] *= -1.0
        elif gate.pauli == "Y":
            a = psi[lo].copy()
            psi[lo] = -1j * psi[hi]
            psi[hi] = 1j * a
        elif gate.pauli != "I":
            raise ValueError(f"unknown Pauli axis {gate.pauli!r}")
        return psi
    if kind == "CP_MINUS1":
        psi = psi.copy()
        psi[_pattern_mask(n, gate.controls)] *= -1.0
        return psi
    if kind == "PREP":
        return _apply_register(psi, n, gate.qubits, _householder(gate.amplitudes))
    raise ValueError(f"unknown gate kind {kind!r}")


def _apply_register(psi: np.ndarray, n: int, qubits: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    # register value r = sum_j bit(qubits[j]) << j; tensor axis k holds qubit n-1-k
    axes = [n - 1 - q for q in reversed(qubits)]
    t = np.moveaxis(psi.reshape((2,) * n), axes, range(len(axes)))
    shape = t.shape
    t = (u @ t.reshape(2 ** len(qubits), -1)).reshape(shape)
    return np.moveaxis(t, range(len(axes)), axes).reshape(-1)


def run(circuit: Circuit, initial: np.ndarray | None = None) -> QuantumState:
    n = circuit.n_qubits
    if n > MAX_QUBITS:
        raise CircuitWidthError(f"circuit width {n} exceeds the {MAX_QUBITS}-qubit simulator limit")
    if initial is None:
        psi = np.zeros(2 ** n, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.array(initial, dtype=complex)
    for g in circuit.gates:
        psi = apply_gate(psi, g, n)
    return QuantumState(n, psi)


def expectation(state: QuantumState, h: np.ndarray) -> float:
    psi = state.amplitudes
    if h.shape != (psi.size, psi.size):
        raise ValueError(f"operator shape {h.shape} does not match state dimension {psi.size}")
    val = np.vdot(psi, h @ psi)
    assert abs(val.imag) <= 1e-10 * max(1.0, abs(val.real)), f"non-real expectation {val}"
    return float(val.real)


def prob_subset_zero(state: QuantumState, qubits: Sequence[int]) -> float:
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubit indices in {qubits}")
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"qubit {q} out of range")
    mask = sum(1 << q for q in qubits)
    idx = np.arange(state.amplitudes.size)
    p = state.probabilities[(idx & mask) == 0].sum()
    return float(min(1.0, max(0.0, p)))


def parameter_shift_grad(circuit: Circuit, cost: Callable[[Circuit], float], k: int) -> float:
    """Two-term parameter-shift derivative of ``cost`` w.r.t. parameter ``k``.

    Exact when ``cost`` is an expectation value of the circuit's output
    state; the input circuit is not modified.
    """
    theta = circuit.parameters()
    if not 0 <= k < theta.size:
        raise IndexError(f"parameter index {k} out of range for {theta.size} parameters")
    plus, minus = theta.copy(), theta.copy()
    plus[k] += 0.5 * math.pi
    minus[k] -= 0.5 * math.pi
    return 0.5 * (cost(circuit.with_parameters(plus)) - cost(circuit.with_parameters(minus)))


def _apply_generator(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    q = gate.target
    if gate.kind == "RX":
        return psi[_flip(n, q)]
    if gate.kind == "RY":
        return -1j * _zsign(n, q) * psi[_flip(n, q)]
    return _zsign(n, q) * psi


def expectation_shift_gradient(circuit: Circuit, h: np.ndarray) -> tuple[float, np.ndarray]:
    """``<H>`` and its full parameter-shift gradient in one backward sweep.

    For ``R_P(theta) = exp(-i theta P / 2)`` the two shifted circuits give
    states ``(a -+ i b) / sqrt(2)`` with ``a`` the unshifted output and ``b``
    the output with ``P`` inserted after the rotation, so
    ``(f(theta + pi/2) - f(theta - pi/2)) / 2 = Im <a|H|b>``.  Pulling
    ``H a`` back through the suffix makes every term a single inner
    product, which gives the shift-rule values at the cost of one extra
    pass over the circuit.
    """
    n = circuit.n_qubits
    psi = run(circuit).amplitudes
    lam = h @ psi
    value = np.vdot(psi, lam).real
    grads = []
    for g in reversed(circuit.gates):
        if g.parameterized:
            grads.append(np.vdot(lam, _apply_generator(psi, g, n)).imag)
        inv = inverse_gate(g)
        psi = apply_gate(psi, inv, n)
        lam = apply_gate(lam, inv, n)
    return float(value), np.array(grads[::-1], dtype=float)


def inverse_gate(gate: Gate) -> Gate:
    if gate.parameterized:
        return Gate(gate.kind, gate.target, angle=-gate.angle)
    # every other kind in the set is self-inverse
    return gate


def inverse(circuit: Circuit) -> Circuit:
    return Circuit(circuit.n_qubits, tuple(inverse_gate(g) for g in reversed(circuit.gates)))


def hadamard_layer(n_qubits: int) -> Circuit:
    return Circuit(n_qubits, tuple(h_gate(q) for q in range(n_qubits)))
