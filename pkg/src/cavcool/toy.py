"""Four-level toy model: two ground states, two decaying excited states.

A single laser drives 0-2 (detuned by delta) and 1-3 (resonant); both excited
states decay into |0> and |1> at gamma/2 each. The master equation closes on
seven real expectation values, so the model is integrated as a linear
rate-equation system

    state = (p0, p1, p2, p3, k02, k13, l02)

with k = 2 Im and l = 2 Re of the corresponding density-matrix coherences.
Closed forms for the stationary fidelity and the heating/cooling rates are
implemented alongside; the direct linear solve serves as their exactness oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateModelError, DomainError, StepSizeError

P0, P1, P2, P3, K02, K13, L02 = range(7)
STATE_LABELS = ("p0", "p1", "p2", "p3", "k02", "k13", "l02")

# dt defaults/limits as fractions of 1/max(delta, gamma, omega(0))
DEFAULT_STEP_FRACTION = 0.02
MAX_STEP_FRACTION = 0.05
DRIFT_LIMIT = 1.0e-6


@dataclass(frozen=True)
class ToyParams:
    """Drive and decay parameters, all in units of the detuning scale."""

    omega: float
    delta: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.omega < 0 or self.gamma < 0:
            raise DomainError("omega and gamma must be non-negative")


def initial_state(level: int) -> np.ndarray:
    """State vector with all population in one bare level, no coherences."""
    if level not in (0, 1, 2, 3):
        raise DomainError(f"level must be in {{0,1,2,3}}, got {level}")
    s = np.zeros(7)
    s[level] = 1.0
    return s


def _generator_parts(p: ToyParams) -> tuple[np.ndarray, np.ndarray]:
    """Split the linear generator as A(omega) = a0 + omega * a1."""
    g, d = p.gamma, p.delta
    a0 = np.zeros((7, 7))
    a0[P0, P2] = a0[P0, P3] = 0.5 * g
    a0[P1, P2] = a0[P1, P3] = 0.5 * g
    a0[P2, P2] = -g
    a0[P3, P3] = -g
    a0[K02, K02] = -0.5 * g
    a0[K02, L02] = d
    a0[K13, K13] = -0.5 * g
    a0[L02, K02] = -d
    a0[L02, L02] = -0.5 * g

    a1 = np.zeros((7, 7))
    a1[P0, K02] = -0.5
    a1[P1, K13] = -0.5
    a1[P2, K02] = 0.5
    a1[P3, K13] = 0.5
    a1[K02, P0] = 1.0
    a1[K02, P2] = -1.0
    a1[K13, P1] = 1.0
    a1[K13, P3] = -1.0
    return a0, a1


def rate_matrix(p: ToyParams, omega: float | None = None) -> np.ndarray:
    """Linear generator A with d(state)/dt = A @ state."""
    a0, a1 = _generator_parts(p)
    return a0 + (p.omega if omega is None else omega) * a1


def rate_rhs(state: np.ndarray, p: ToyParams, omega: float | None = None) -> np.ndarray:
    """Time derivatives of the seven expectation values."""
    state = np.asarray(state, dtype=float)
    if state.shape != (7,):
        raise DomainError(f"state must have shape (7,), got {state.shape}")
    return rate_matrix(p, omega) @ state


@dataclass
class ToySeries:
    """Fixed-step trajectory of the seven expectation values."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 7)

    @property
    def fidelity(self) -> np.ndarray:
        """Population of the target state |0> at each time."""
        return self.states[:, P0]


def integrate(
    p: ToyParams,
    state0: np.ndarray,
    t_end: float,
    dt: float | None = None,
    omega_t: Callable[[float], float] | None = None,
) -> ToySeries:
    """Classical RK4 integration of the rate equations.

    omega_t, when given, replaces the constant Rabi frequency; it is evaluated
    at every internal stage time so the step retains 4th-order accuracy. The
    step must satisfy dt <= 0.05/max(delta, gamma, omega(0)); total population
    is monitored and a drift beyond 1e-6 aborts the run.
    """
    state0 = np.asarray(state0, dtype=float)
    if state0.shape != (7,):
        raise DomainError(f"state0 must have shape (7,), got {state0.shape}")
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    omega0 = p.omega if omega_t is None else float(omega_t(0.0))
    scale = max(p.delta, p.gamma, omega0)
    if dt is None:
        dt = DEFAULT_STEP_FRACTION / scale
    if dt > MAX_STEP_FRACTION / scale:
        raise StepSizeError(
            f"dt={dt:g} exceeds {MAX_STEP_FRACTION:g}/max(delta,gamma,omega(0))={MAX_STEP_FRACTION / scale:g}"
        )

    n_steps = max(1, math.ceil(t_end / dt - 1e-12))
    h = t_end / n_steps
    times = np.linspace(0.0, t_end, n_steps + 1)
    states = np.empty((n_steps + 1, 7))
    states[0] = state0

    a0, a1 = _generator_parts(p)
    pop0 = state0[:4].sum()
    s = state0.copy()

    if omega_t is None:
        # constant drive: the RK4 step is a fixed linear map, build it once
        a = a0 + p.omega * a1
        eye = np.eye(7)
        k1 = a
        k2 = a @ (eye + 0.5 * h * k1)
        k3 = a @ (eye + 0.5 * h * k2)
        k4 = a @ (eye + h * k3)
        step = eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(1, n_steps + 1):
            s = step @ s
            states[i] = s
            drift = abs(s[:4].sum() - pop0)
            if drift > DRIFT_LIMIT:
                raise StepSizeError(
                    f"population drift {drift:.3e} exceeds {DRIFT_LIMIT:g} at t={times[i]:g}"
                )
    else:
        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return a0 @ y + float(omega_t(t)) * (a1 @ y)

        for i in range(1, n_steps + 1):
            t = times[i - 1]
            k1 = rhs(t, s)
            k2 = rhs(t + 0.5 * h, s + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, s + 0.5 * h * k2)
            k4 = rhs(t + h, s + h * k3)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[i] = s
            drift = abs(s[:4].sum() - pop0)
            if drift > DRIFT_LIMIT:
                raise StepSizeError(
                    f"population drift {drift:.3e} exceeds {DRIFT_LIMIT:g} at t={times[i]:g}"
                )

    return ToySeries(times=times, states=states)


def stationary_solve(p: ToyParams) -> np.ndarray:
    """Unique stationary state from the linear system {rhs = 0, sum(p_i) = 1}.

    Unique only for omega > 0 and gamma > 0; otherwise the stationary manifold
    is degenerate and a DegenerateModelError names the null space.
    """
    if p.omega == 0:
        raise DegenerateModelError(
            "stationary state degenerate for omega = 0: every population split "
            "over the ground states (null space spanned by p0 and p1, with "
            "p2 = p3 = coherences = 0) is stationary"
        )
    if p.gamma == 0:
        raise DegenerateModelError(
            "stationary state degenerate for gamma = 0: without dissipation the "
            "null space contains the two-parameter family p1 = p3, k13 = k02 = 0, "
            "l02 = -omega*(p0 - p2)/delta"
        )
    a = rate_matrix(p)
    m = a.copy()
    m[P0, :] = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
    b = np.zeros(7)
    b[P0] = 1.0
    s = np.linalg.solve(m, b)
    residual = np.max(np.abs(a @ s))
    if residual > 1e-9:
        raise DegenerateModelError(f"stationary solve left residual {residual:.3e}")
    return s


def stationary_fidelity(p: ToyParams) -> float:
    """Stationary population of |0>: 1 - (3W^2+G^2)/(4D^2+4W^2+2G^2)."""
    w2, g2, d2 = p.omega**2, p.gamma**2, p.delta**2
    return 1.0 - (3.0 * w2 + g2) / (4.0 * d2 + 4.0 * w2 + 2.0 * g2)


def stationary_fidelity_large_delta(p: ToyParams) -> float:
    """Large-detuning form 1 - (3W^2+G^2)/(4D^2)."""
    return 1.0 - (3.0 * p.omega**2 + p.gamma**2) / (4.0 * p.delta**2)


def max_fidelity(delta: float, gamma: float) -> float:
    """Zero-drive ceiling 1 - G^2/(4D^2+2G^2)."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return 1.0 - gamma**2 / (4.0 * delta**2 + 2.0 * gamma**2)


def heating_rate(p: ToyParams) -> float:
    """Rate at which the target state loses population: G W^2/(G^2+4D^2)."""
    return p.gamma * p.omega**2 / (p.gamma**2 + 4.0 * p.delta**2)


def cooling_rate(p: ToyParams) -> float:
    """Full cooling rate G W^2 (4D^2+W^2+G^2) / [(4D^2+G^2)(3W^2+G^2)]."""
    if p.omega == 0 and p.gamma == 0:
        raise DegenerateModelError("cooling rate is identically zero for omega = gamma = 0")
    w2, g2, d2 = p.omega**2, p.gamma**2, p.delta**2
    return p.gamma * w2 * (4.0 * d2 + w2 + g2) / ((4.0 * d2 + g2) * (3.0 * w2 + g2))


def cooling_rate_approx(p: ToyParams) -> float:
    """Detuning-independent form G W^2/(3W^2+G^2), valid for large detunings."""
    if p.omega == 0 and p.gamma == 0:
        raise DegenerateModelError("cooling rate is identically zero for omega = gamma = 0")
    w2, g2 = p.omega**2, p.gamma**2
    return p.gamma * w2 / (3.0 * w2 + g2)


def transient_population(gamma_c: float, gamma_h: float, t):
    """Two-rate solution P0(t) = gc/(gc+gh) (1 - exp(-(gc+gh) t)) from P0(0)=0."""
    total = gamma_c + gamma_h
    if not total > 0:
        raise DomainError("gamma_c + gamma_h must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    out = gamma_c / total * (1.0 - np.exp(-total * t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PulseSchedule:
    """Rabi-frequency ramp Omega(t) = multiplier*omega0 / (1 + gamma_c0*t)^2.

    gamma_c0 is the cooling rate evaluated at the reference amplitude omega0
    (multiplier 3 for the toy model, 6 for the cavity scheme).
    """

    omega0: float
    gamma_c0: float
    multiplier: float

    def __post_init__(self):
        if not (self.omega0 > 0 and self.gamma_c0 > 0 and self.multiplier > 0):
            raise DomainError("omega0, gamma_c0 and multiplier must all be positive")

    @classmethod
    def toy(cls, omega0: float, gamma: float) -> "PulseSchedule":
        gc0 = gamma * omega0**2 / (3.0 * omega0**2 + gamma**2)
        return cls(omega0=omega0, gamma_c0=gc0, multiplier=3.0)

    def omega_at(self, t):
        t = np.asarray(t, dtype=float)
        out = self.multiplier * self.omega0 / (1.0 + self.gamma_c0 * t) ** 2
        return float(out) if out.ndim == 0 else out


def pulse_omega(t, sched: PulseSchedule):
    """Schedule amplitude at time t (free-function form of omega_at)."""
    return sched.omega_at(t)


def fitted_decay_rate(times: np.ndarray, fidelity: np.ndarray, f_inf: float) -> float:
    """Slope magnitude of log(1-F) over the window 1-F in [3(1-F_inf), 0.5].

    The window excludes the initial transient (1-F still near its starting
    value) and the stationary plateau.
    """
    times = np.asarray(times, dtype=float)
    gap = 1.0 - np.asarray(fidelity, dtype=float)
    lo = 3.0 * (1.0 - f_inf)
    mask = (gap <= 0.5) & (gap >= lo)
    if mask.sum() < 2:
        raise DomainError(
            f"fit window [{lo:g}, 0.5] contains {int(mask.sum())} samples; run longer or sample denser"
        )
    slope = np.polyfit(times[mask], np.log(gap[mask]), 1)[0]
    return -float(slope)
