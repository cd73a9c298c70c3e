"""Pauli-string decomposition of real symmetric matrices.

A word ``"XZI"`` denotes ``X (x) Z (x) I``: the first letter is the most
significant tensor factor, so letter ``k`` of an ``n``-letter word acts on
qubit ``n - 1 - k`` in the little-endian statevector convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

PRUNE_THRESHOLD = 1e-12
MAX_DIM = 256
LETTERS = "IXYZ"

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliTerm:
    coeff: float
    word: str


@dataclass
class NormalizedDecomposition:
    """Sign-folded, sum-normalised coefficients plus the ancilla amplitudes.

    ``terms[l] = (unit_coeff, word, sign)``; term ``l`` is selected by the
    ancilla register value ``l``.
    """

    terms: list[tuple[float, str, int]]
    amplitudes: np.ndarray
    m: int
    scale: float

    @property
    def n_terms(self) -> int:
        return len(self.terms)


def _walsh_hadamard(f: np.ndarray) -> np.ndarray:
    """Unnormalised WHT along the last axis (length a power of two)."""
    out = f.astype(float, copy=True)
    rows, size = out.shape
    h = 1
    while h < size:
        v = out.reshape(rows, size // (2 * h), 2, h)
        a = v[:, :, 0, :].copy()
        b = v[:, :, 1, :]
        v[:, :, 0, :] = a + b
        v[:, :, 1, :] = a - b
        h *= 2
    return out


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    count = np.zeros_like(a)
    while a.any():
        count += a & 1
        a >>= 1
    return count


_LETTER_FOR_BITS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


def _word(x: int, z: int, n: int) -> str:
    return "".join(_LETTER_FOR_BITS[(x >> q) & 1, (z >> q) & 1] for q in range(n - 1, -1, -1))


def pauli_coefficients(h: np.ndarray) -> np.ndarray:
    """All ``4**n`` coefficients ``Tr(H P) / 2**n`` indexed by ``[x_mask, z_mask]``.

    ``P(x, z) = i**|x & z| X**x Z**z``, so ``Tr(H P)`` is a Walsh-Hadamard
    transform over ``c`` of ``H[c, c ^ x]`` with an ``i**|x & z|`` phase.
    Cost is ``O(n 4**n)``.
    """
    dim = h.shape[0]
    idx = np.arange(dim)
    f = h[idx[None, :], idx[None, :] ^ idx[:, None]]
    w = _walsh_hadamard(f)
    ys = _popcount(idx[:, None] & idx[None, :])
    odd = (ys % 2) == 1
    if np.abs(w[odd]).max(initial=0.0) > 1e-9 * max(1.0, np.abs(h).max()):
        raise ValueError("matrix is not real symmetric: odd-Y Pauli strings have weight")
    phase = np.where(ys % 4 == 2, -1.0, 1.0)
    return np.where(odd, 0.0, phase * w) / dim


def decompose(h: np.ndarray, prune: float = PRUNE_THRESHOLD) -> list[PauliTerm]:
    """Pauli terms of a real symmetric matrix, in lexicographic word order (I<X<Y<Z)."""
    h = np.asarray(h, dtype=float)
    dim = h.shape[0]
    if h.ndim != 2 or h.shape[1] != dim or dim < 1 or dim & (dim - 1):
        raise ValueError(f"matrix dimension must be a power of two, got shape {h.shape}")
    if dim > MAX_DIM:
        raise ValueError(f"dimension {dim} exceeds {MAX_DIM}")
    n = dim.bit_length() - 1
    coeffs = pauli_coefficients(h)
    xs, zs = np.nonzero(np.abs(coeffs) > prune)
    terms = [PauliTerm(float(coeffs[x, z]), _word(int(x), int(z), n)) for x, z in zip(xs, zs)]
    order = {c: i for i, c in enumerate(LETTERS)}
    terms.sort(key=lambda t: [order[c] for c in t.word])
    return terms


def word_matrix(word: str) -> np.ndarray:
    if not word:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, (_PAULI[c] for c in word))


def reconstruct(terms: list[PauliTerm], n: int) -> np.ndarray:
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for t in terms:
        if len(t.word) != n:
            raise ValueError(f"word {t.word!r} has length {len(t.word)}, expected {n}")
        out += t.coeff * word_matrix(t.word)
    if np.abs(out.imag).max(initial=0.0) > 1e-12:
        raise ValueError("reconstruction is not real")
    return out.real.copy()


def normalize_for_vqls(terms: list[PauliTerm]) -> NormalizedDecomposition:
    if not terms:
        raise ValueError("empty term list")
    total = float(sum(abs(t.coeff) for t in terms))
    if total == 0.0:
        raise ValueError("all Pauli coefficients are zero")
    folded = sorted(((abs(t.coeff) / total, t.word, 1 if t.coeff >= 0 else -1) for t in terms),
                    key=lambda r: (-r[0], r[1]))
    m = math.ceil(math.log2(len(folded))) if len(folded) > 1 else 0
    amplitudes = np.zeros(2 ** m)
    amplitudes[:len(folded)] = np.sqrt([r[0] for r in folded])
    amplitudes /= np.linalg.norm(amplitudes)
    return NormalizedDecomposition(terms=folded, amplitudes=amplitudes, m=m, scale=total)


def format_terms(terms: list[PauliTerm]) -> str:
    return "".join(f"{t.coeff:.17g}\t{t.word}\n" for t in terms)


def parse_terms(text: str) -> list[PauliTerm]:
    out = []
    for line in text.splitlines():
        if line.strip():
            coeff, word = line.split("\t")
            out.append(PauliTerm(float(coeff), word.strip()))
    return out
