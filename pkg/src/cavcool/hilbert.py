"""Product Hilbert space of two three-level atoms and a truncated cavity mode.

States and operators are plain numpy arrays (complex128). The basis ordering is
fixed once and for all: index(j1, j2, n) = (3*j1 + j2)*(n_max+1) + n, i.e. atom 1
is the slowest index and the photon number the fastest. Every golden file and
every solver in this package relies on that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

N_LEVELS = 3  # atomic levels |0>, |1>, |2>


@dataclass(frozen=True)
class HilbertSpace:
    """Two atoms (3 levels each) and a cavity mode truncated at n_max photons."""

    n_max: int = 3

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 0:
            raise DomainError(f"n_max must be a non-negative integer, got {self.n_max!r}")

    @property
    def n_photon(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return N_LEVELS * N_LEVELS * (self.n_max + 1)

    def index(self, j1: int, j2: int, n: int) -> int:
        """Basis index of |j1 j2, n>."""
        if j1 not in (0, 1, 2) or j2 not in (0, 1, 2):
            raise DomainError(f"atomic levels must be in {{0,1,2}}, got ({j1}, {j2})")
        if not 0 <= n <= self.n_max:
            raise DomainError(f"photon number {n} outside [0, {self.n_max}]")
        return (N_LEVELS * j1 + j2) * self.n_photon + n

    def basis_state(self, j1: int, j2: int, n: int) -> np.ndarray:
        """Unit vector for the bare state |j1 j2, n>."""
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(j1, j2, n)] = 1.0
        return psi

    def labels(self) -> list[str]:
        """Bare-state labels in basis order, e.g. '|01,2>'."""
        out = []
        for j1 in range(N_LEVELS):
            for j2 in range(N_LEVELS):
                for n in range(self.n_photon):
                    out.append(f"|{j1}{j2},{n}>")
        return out


def dagger(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def annihilation(space: HilbertSpace) -> np.ndarray:
    """Cavity annihilation operator c, identity on both atoms: |n> -> sqrt(n)|n-1>."""
    npho = space.n_photon
    a = np.zeros((npho, npho), dtype=complex)
    for n in range(1, npho):
        a[n - 1, n] = np.sqrt(n)
    return np.kron(np.eye(N_LEVELS * N_LEVELS, dtype=complex), a)


def creation(space: HilbertSpace) -> np.ndarray:
    return dagger(annihilation(space))


def number_operator(space: HilbertSpace) -> np.ndarray:
    """Photon number operator c†c."""
    npho = space.n_photon
    nd = np.diag(np.arange(npho, dtype=complex))
    return np.kron(np.eye(N_LEVELS * N_LEVELS, dtype=complex), nd)


def atom_transition(space: HilbertSpace, atom: int, a: int, b: int) -> np.ndarray:
    """|a><b| on the given atom (1 or 2), identity on the other atom and the mode."""
    if atom not in (1, 2):
        raise DomainError(f"atom index must be 1 or 2, got {atom}")
    if a not in (0, 1, 2) or b not in (0, 1, 2):
        raise DomainError(f"atomic levels must be in {{0,1,2}}, got ({a}, {b})")
    e = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    e[a, b] = 1.0
    eye = np.eye(N_LEVELS, dtype=complex)
    pair = np.kron(e, eye) if atom == 1 else np.kron(eye, e)
    return np.kron(pair, np.eye(space.n_photon, dtype=complex))


def exchange_operator(space: HilbertSpace) -> np.ndarray:
    """Permutation swapping the two atoms: |j1 j2, n> -> |j2 j1, n>."""
    dim = space.dim
    perm = np.zeros((dim, dim), dtype=complex)
    for j1 in range(N_LEVELS):
        for j2 in range(N_LEVELS):
            for n in range(space.n_photon):
                perm[space.index(j2, j1, n), space.index(j1, j2, n)] = 1.0
    return perm


def plus_state(space: HilbertSpace) -> np.ndarray:
    """The target state |+,0> = (|01,0> + |10,0>)/sqrt(2), normalized to one ulp."""
    return (space.basis_state(0, 1, 0) + space.basis_state(1, 0, 0)) / np.sqrt(2.0)


def expectation(op: np.ndarray, psi: np.ndarray) -> complex:
    """<psi|op|psi> (no normalization applied)."""
    op = np.asarray(op)
    psi = np.asarray(psi)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or psi.shape != (op.shape[1],):
        raise DomainError(f"shape mismatch: operator {op.shape}, state {psi.shape}")
    return complex(np.vdot(psi, op @ psi))
