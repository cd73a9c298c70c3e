"""Tracking Hamiltonian and linear system construction, plus dense oracles.

Matrices are plain ``float64`` numpy arrays, symmetric by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .toy_detector import ALIGNMENT_EPSILON, Event, chained_pairs, segment_cosine

PD_CHECK_MAX_DIM = 256
MAX_EIG_DIM = 4096
MAX_CONDITION = 1e12


class NotPositiveDefiniteError(ValueError):
    pass


class IllConditionedError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class VqeParams:
    epsilon: float = ALIGNMENT_EPSILON
    gamma: float = 0.1
    delta: float = 0.002

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("gamma and delta must be non-negative")


@dataclass
class LinearSystem:
    a: np.ndarray
    b: np.ndarray
    zeta: float
    eta: float
    epsilon: float

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def aligned_pairs(event: Event, epsilon: float) -> list[tuple[int, int]]:
    """Index pairs of chained segments whose cosine is at least ``1 - epsilon``."""
    return [(a.index, b.index) for a, b in chained_pairs(event)
            if segment_cosine(event, a, b) >= 1.0 - epsilon]


def build_h_ang(event: Event, epsilon: float = ALIGNMENT_EPSILON) -> np.ndarray:
    h = np.zeros((event.n_segments, event.n_segments))
    for i, j in aligned_pairs(event, epsilon):
        h[i, j] = h[j, i] = -1.0
    return h


def build_h_bif(event: Event) -> np.ndarray:
    from_hit = np.array([s.from_hit for s in event.segments])
    to_hit = np.array([s.to_hit for s in event.segments])
    shared = (from_hit[:, None] == from_hit[None, :]) | (to_hit[:, None] == to_hit[None, :])
    np.fill_diagonal(shared, False)
    return shared.astype(float)


def build_h_occ(event: Event) -> np.ndarray:
    """Quadratic form of ``(sum(S) - T)**2`` minus ``T**2``, with ``S_i**2 = S_i``."""
    n = event.n_segments
    target = event.expected_true_segments
    h = np.ones((n, n))
    np.fill_diagonal(h, 1.0 - 2.0 * target)
    return h


def build_vqe_hamiltonian(event: Event, params: VqeParams | None = None) -> np.ndarray:
    p = params or VqeParams()
    return (build_h_ang(event, p.epsilon)
            + p.gamma * build_h_bif(event)
            + p.delta * build_h_occ(event))


def default_zeta(h_ang: np.ndarray) -> float:
    return float(np.abs(h_ang).sum(axis=1).max()) + 1.0


def build_vqls_system(
    event: Event,
    epsilon: float = ALIGNMENT_EPSILON,
    zeta: float | None = None,
    eta: float = 1.0,
) -> LinearSystem:
    """Linear system ``A S = b`` with ``A = H_ang + zeta * I`` and ``b = eta * 1``.

    Aligned chained pairs couple with ``-1`` so that track segments reinforce
    each other in the solution.  ``zeta`` defaults to the largest absolute
    off-diagonal row sum plus one, which makes ``A`` strictly diagonally
    dominant.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    h_ang = build_h_ang(event, epsilon)
    if zeta is None:
        zeta = default_zeta(h_ang)
    a = h_ang + zeta * np.eye(event.n_segments)
    if a.shape[0] <= PD_CHECK_MAX_DIM:
        lam = float(np.linalg.eigvalsh(a)[0])
        if lam <= 0:
            raise NotPositiveDefiniteError(
                f"A is not positive definite: smallest eigenvalue {lam:.6g}; "
                f"increase zeta above {zeta - lam:.6g}")
    b = np.full(event.n_segments, float(eta))
    return LinearSystem(a=a, b=b, zeta=float(zeta), eta=float(eta), epsilon=epsilon)


def classical_ground_state(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimal eigenpair; the eigenvector's largest-magnitude entry is positive."""
    if h.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"dimension {h.shape[0]} exceeds {MAX_EIG_DIM}")
    w, v = np.linalg.eigh(h)
    state = v[:, 0].copy()
    k = int(np.argmax(np.abs(state)))
    if state[k] < 0:
        state = -state
    return float(w[0]), state


def classical_linear_solve(system: LinearSystem) -> np.ndarray:
    cond = float(np.linalg.cond(system.a))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(f"matrix is singular or ill-conditioned (cond ~ {cond:.3g})")
    x = np.linalg.solve(system.a, system.b)
    residual = np.linalg.norm(system.a @ x - system.b)
    if residual > 1e-10 * np.linalg.norm(system.b):
        # one step of iterative refinement
        x = x + np.linalg.solve(system.a, system.b - system.a @ x)
    return x


def matrix_to_dict(a: np.ndarray, b: np.ndarray | None = None) -> dict:
    doc = {"dim": int(a.shape[0]), "entries": [float(v) for v in a.ravel()]}
    if b is not None:
        doc["b"] = [float(v) for v in b]
    return doc


def matrix_from_dict(doc: dict) -> tuple[np.ndarray, np.ndarray | None]:
    dim = int(doc["dim"])
    a = np.asarray(doc["entries"], dtype=float).reshape(dim, dim)
    b = np.asarray(doc["b"], dtype=float) if "b" in doc else None
    return a, b


def dump_matrix(a: np.ndarray, b: np.ndarray | None = None) -> str:
    return json.dumps(matrix_to_dict(a, b))
