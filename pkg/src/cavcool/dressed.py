"""Dressed states of the undriven two-atom/cavity Hamiltonian and the driven
transition tables.

The twelve zero- and single-excitation eigenstates are constructed analytically
(fixing the sign/phase conventions that the transition tables depend on) and can
be verified against the Hamiltonian built from raw operators. Energies are in
units of hbar; frequencies default to omega1 = 50 g, omega2 = 1000 g, which only
matter where absolute energies are displayed, never for detunings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .hilbert import HilbertSpace, annihilation, atom_transition, dagger, number_operator

DEFAULT_OMEGA1 = 50.0
DEFAULT_OMEGA2 = 1000.0

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class DressedState:
    label: str
    amplitudes: np.ndarray
    energy: float
    excitation_number: int
    symmetry: str


@dataclass(frozen=True)
class TransitionEntry:
    """One laser-driven transition between dressed states.

    The rabi column keeps the customary dressed-state normalization (it is not
    everywhere the raw matrix element of the projected drive); detuning is
    always laser frequency minus transition frequency.
    """

    ground: str
    excited: str
    laser: int  # 1, 2 drive 0-2; 3 drives 1-2
    rabi: float
    rabi_expr: str
    detuning: float
    detuning_expr: str


def system_hamiltonian(
    space: HilbertSpace,
    g: float,
    omega1: float = DEFAULT_OMEGA1,
    omega2: float = DEFAULT_OMEGA2,
) -> np.ndarray:
    """Undriven Hamiltonian: Jaynes-Cummings coupling plus bare energies.

    Level |0> sits at zero energy and the cavity is resonant with the 1-2
    transition (omega_c = omega2 - omega1).
    """
    c = annihilation(space)
    jc = atom_transition(space, 1, 1, 2) + atom_transition(space, 2, 1, 2)
    h = g * (jc @ dagger(c))
    h = h + dagger(h)
    for i in (1, 2):
        h += omega1 * atom_transition(space, i, 1, 1)
        h += omega2 * atom_transition(space, i, 2, 2)
    h += (omega2 - omega1) * number_operator(space)
    return h


def ground_manifold(space: HilbertSpace, omega1: float = DEFAULT_OMEGA1) -> list[DressedState]:
    """The four zero-excitation eigenstates |00,0>, |+,0>, |-,0>, |11,0>."""
    b = space.basis_state
    plus = (b(0, 1, 0) + b(1, 0, 0)) / SQRT2
    minus = (b(0, 1, 0) - b(1, 0, 0)) / SQRT2
    return [
        DressedState("00,0", b(0, 0, 0), 0.0, 0, SYMMETRIC),
        DressedState("+,0", plus, omega1, 0, SYMMETRIC),
        DressedState("-,0", minus, omega1, 0, ANTISYMMETRIC),
        DressedState("11,0", b(1, 1, 0), 2.0 * omega1, 0, SYMMETRIC),
    ]


def excited_manifold(
    space: HilbertSpace,
    g: float,
    omega1: float = DEFAULT_OMEGA1,
    omega2: float = DEFAULT_OMEGA2,
) -> list[DressedState]:
    """The eight single-excitation eigenstates (one atom in |2> or one photon)."""
    if not g > 0:
        raise DomainError(f"coupling g must be positive, got {g}")
    if space.n_max < 1:
        raise DomainError("single-excitation manifold needs n_max >= 1")
    b = space.basis_state
    mu1 = (b(2, 1, 0) - b(1, 2, 0)) / SQRT2
    mu0p = (b(0, 2, 0) - b(2, 0, 0) + b(0, 1, 1) - b(1, 0, 1)) / 2.0
    mu0m = (b(0, 2, 0) - b(2, 0, 0) - b(0, 1, 1) + b(1, 0, 1)) / 2.0
    la0p = (b(0, 2, 0) + b(2, 0, 0) + b(0, 1, 1) + b(1, 0, 1)) / 2.0
    la0m = (b(0, 2, 0) + b(2, 0, 0) - b(0, 1, 1) - b(1, 0, 1)) / 2.0
    la1p = (b(1, 2, 0) + b(2, 1, 0) + SQRT2 * b(1, 1, 1)) / 2.0
    la1m = (b(1, 2, 0) + b(2, 1, 0) - SQRT2 * b(1, 1, 1)) / 2.0
    return [
        DressedState("00,1", b(0, 0, 1), omega2 - omega1, 1, SYMMETRIC),
        DressedState("mu1", mu1, omega1 + omega2, 1, ANTISYMMETRIC),
        DressedState("mu0,+", mu0p, omega2 + g, 1, ANTISYMMETRIC),
        DressedState("mu0,-", mu0m, omega2 - g, 1, ANTISYMMETRIC),
        DressedState("lambda0,+", la0p, omega2 + g, 1, SYMMETRIC),
        DressedState("lambda0,-", la0m, omega2 - g, 1, SYMMETRIC),
        DressedState("lambda1,+", la1p, omega1 + omega2 + SQRT2 * g, 1, SYMMETRIC),
        DressedState("lambda1,-", la1m, omega1 + omega2 - SQRT2 * g, 1, SYMMETRIC),
    ]


def delta_min(g: float) -> float:
    """Smallest detuning the target state sees under the resonant assignment."""
    if not g > 0:
        raise DomainError(f"coupling g must be positive, got {g}")
    return (SQRT2 - 1.0) * g


def resonant_assignment(
    g: float,
    omega1: float = DEFAULT_OMEGA1,
    omega2: float = DEFAULT_OMEGA2,
) -> tuple[float, float, float]:
    """Laser frequencies that leave only |+,0> off-resonantly driven.

    Returns (wL0_1, wL0_2, wL1) = (omega2 - g, omega2, omega2 - omega1 - sqrt(2) g).
    """
    if not g > 0:
        raise DomainError(f"coupling g must be positive, got {g}")
    return (omega2 - g, omega2, omega2 - omega1 - SQRT2 * g)


# (ground, excited, laser, rabi column in the customary normalization)
_ROW_PLAN = [
    ("00,0", "lambda0,+", 1, "omega01/sqrt(2)"),
    ("00,0", "lambda0,-", 1, "omega01/sqrt(2)"),
    ("00,0", "lambda0,+", 2, "omega02/sqrt(2)"),
    ("00,0", "lambda0,-", 2, "omega02/sqrt(2)"),
    ("+,0", "lambda1,+", 1, "omega01/sqrt(2)"),
    ("+,0", "lambda1,-", 1, "omega01/sqrt(2)"),
    ("+,0", "lambda1,+", 2, "omega02/sqrt(2)"),
    ("+,0", "lambda1,-", 2, "omega02/sqrt(2)"),
    ("+,0", "lambda0,+", 3, "omega1l"),
    ("+,0", "lambda0,-", 3, "omega1l"),
    ("-,0", "mu1", 1, "omega01"),
    ("-,0", "mu1", 2, "omega02"),
    ("-,0", "mu0,+", 3, "omega1l"),
    ("-,0", "mu0,-", 3, "omega1l"),
    ("11,0", "lambda1,+", 3, "omega1l"),
    ("11,0", "lambda1,-", 3, "omega1l"),
]

_LASER_SYMBOL = {1: "wL01", 2: "wL02", 3: "wL1"}

# energy offset of each excited state from its manifold center, as (text, value in g)
_BRANCH = {
    "mu1": ("", 0.0),
    "mu0,+": ("g", 1.0),
    "mu0,-": ("-g", -1.0),
    "lambda0,+": ("g", 1.0),
    "lambda0,-": ("-g", -1.0),
    "lambda1,+": ("sqrt(2)g", SQRT2),
    "lambda1,-": ("-sqrt(2)g", -SQRT2),
}


def _detuning_expr(laser: int, excited: str) -> str:
    base = f"{_LASER_SYMBOL[laser]} - w2" if laser in (1, 2) else "wL1 + w1 - w2"
    text, value = _BRANCH[excited]
    if value == 0.0:
        return base
    return f"{base} - {text}" if value > 0 else f"{base} + {text.lstrip('-')}"


def transition_table(
    laser_freqs: tuple[float, float, float],
    amplitudes: tuple[float, float, float],
    g: float,
    omega1: float = DEFAULT_OMEGA1,
    omega2: float = DEFAULT_OMEGA2,
) -> list[TransitionEntry]:
    """All laser-driven transitions between the zero- and one-excitation manifolds.

    laser_freqs = (wL0_1, wL0_2, wL1); amplitudes = (omega01, omega02, omega1l).
    Rows whose laser amplitude is zero are omitted. Detunings are computed from
    the dressed-state energies, so they are exact for any frequency choice.
    """
    if any(a < 0 for a in amplitudes):
        raise DomainError("Rabi amplitudes must be non-negative")
    space = HilbertSpace(1)
    energies = {s.label: s.energy for s in ground_manifold(space, omega1)}
    energies.update(
        {s.label: s.energy for s in excited_manifold(space, g, omega1, omega2)}
    )
    rabi_value = {
        "omega01/sqrt(2)": amplitudes[0] / SQRT2,
        "omega02/sqrt(2)": amplitudes[1] / SQRT2,
        "omega01": amplitudes[0],
        "omega02": amplitudes[1],
        "omega1l": amplitudes[2],
    }
    amplitude_of_laser = dict(zip((1, 2, 3), amplitudes))
    rows = []
    for ground, excited, laser, rabi_expr in _ROW_PLAN:
        if amplitude_of_laser[laser] == 0:
            continue
        detuning = laser_freqs[laser - 1] - (energies[excited] - energies[ground])
        rows.append(
            TransitionEntry(
                ground=ground,
                excited=excited,
                laser=laser,
                rabi=rabi_value[rabi_expr],
                rabi_expr=rabi_expr,
                detuning=detuning,
                detuning_expr=_detuning_expr(laser, excited),
            )
        )
    return rows


def resonant_table(
    amplitudes: tuple[float, float, float],
    g: float,
    omega1: float = DEFAULT_OMEGA1,
    omega2: float = DEFAULT_OMEGA2,
) -> list[TransitionEntry]:
    """Transition table under the resonant laser-frequency assignment."""
    return transition_table(
        resonant_assignment(g, omega1, omega2), amplitudes, g, omega1, omega2
    )
