import math

import numpy as np
import pytest

from trackqas.statevector import Circuit, cx_gate, hadamard_layer, rotation
from trackqas.toy_detector import generate_event


def random_circuit(n: int, n_gates: int, rng: np.random.Generator, start_uniform=True) -> Circuit:
    c = hadamard_layer(n) if start_uniform else Circuit(n)
    gates = []
    for _ in range(n_gates):
        kind = ("CX", "RX", "RY", "RZ")[rng.integers(4 if n > 1 else 3) + (0 if n > 1 else 1)]
        if kind == "CX":
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(cx_gate(int(a), int(b)))
        else:
            gates.append(rotation(kind, int(rng.integers(n)), rng.uniform(-math.pi, math.pi)))
    return c.append(*gates)


def random_symmetric(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim))
    return a + a.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def event_8():
    return generate_event(2, 3, seed=7)


@pytest.fixture(scope="session")
def event_16():
    return generate_event(2, 5, seed=3)


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def real_state_circuit(vec: np.ndarray) -> Circuit:
    """CX + RY circuit preparing the real unit vector ``vec`` from ``|0...0>``.

    A binary tree of uniformly controlled RY rotations, most significant
    qubit first; each multiplexer is expanded into RY and CX gates over a
    Gray-code ordering of the control states.
    """
    vec = np.asarray(vec, dtype=float)
    vec = vec / np.linalg.norm(vec)
    n = int(np.log2(vec.size))
    gates = []
    for t in range(n - 1, -1, -1):
        k = n - 1 - t
        alphas = np.empty(2 ** k)
        for j in range(2 ** k):
            block = vec[j << (t + 1):(j + 1) << (t + 1)]
            half = block.size // 2
            if t == 0:
                a0, a1 = block[0], block[1]
            else:
                a0, a1 = np.linalg.norm(block[:half]), np.linalg.norm(block[half:])
            alphas[j] = 2 * math.atan2(a1, a0)
        if k == 0:
            gates.append(rotation("RY", t, alphas[0]))
            continue
        size = 2 ** k
        thetas = [sum((-1) ** bin(j & _gray(i)).count("1") * alphas[j] for j in range(size)) / size
                  for i in range(size)]
        for i in range(size):
            gates.append(rotation("RY", t, thetas[i]))
            bit = (_gray(i) ^ _gray((i + 1) % size)).bit_length() - 1
            gates.append(cx_gate(t + 1 + bit, t))
    return Circuit(n, tuple(gates))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
