"""Two atoms in a lossy optical cavity under three-laser driving.

Everything is simulated in the frame rotating with the bare atomic/cavity
frequencies, so the Jaynes-Cummings coupling is static and the three lasers
leave residual phases at the detunings (d1, d2, d3) only; with the resonant
assignment those are (-g, 0, -sqrt(2) g) and the step size is set by g alone.
Rates and times are in units of g (g = 1 by default).

Two solvers target the same master equation: a quantum-jump unravelling
(norm-threshold waiting-time method, batched over trajectories) and a direct
density-matrix integrator that serves as its statistical oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepSizeError
from .hilbert import (
    HilbertSpace,
    annihilation,
    atom_transition,
    dagger,
    plus_state,
)
from .toy import PulseSchedule

SQRT2 = float(np.sqrt(2.0))

DEFAULT_DT = 0.005  # units of 1/g
DEFAULT_SAMPLE_DT = 1.0
MAX_STEP_DECAY_PROB = 0.05
NORM_RISE_LIMIT = 1.0e-9
TRACE_DRIFT_LIMIT = 1.0e-6
_MAX_JUMPS_PER_STEP = 100


@dataclass(frozen=True)
class CavityParams:
    """Coupling, decay rates and the three laser Rabi amplitudes (units of g)."""

    gamma0: float
    gamma1: float
    kappa: float
    omega01: float = 0.0
    omega02: float = 0.0
    omega1l: float = 0.0
    g: float = 1.0
    n_max: int = 3

    def __post_init__(self):
        if self.g < 0:
            raise DomainError(f"coupling g must be non-negative, got {self.g}")
        for name in ("gamma0", "gamma1", "kappa", "omega01", "omega02", "omega1l"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.n_max < 0:
            raise DomainError("n_max must be non-negative")

    @property
    def gamma(self) -> float:
        """Total spontaneous decay rate of |2>."""
        return self.gamma0 + self.gamma1

    @property
    def cooperativity(self) -> float:
        return cooperativity(self.g, self.kappa, self.gamma)

    @classmethod
    def with_cooperativity(
        cls,
        c: float,
        omega: float = 0.03,
        kappa_over_gamma: float = 2.0,
        g: float = 1.0,
        n_max: int = 3,
    ) -> "CavityParams":
        """Rates from the cooperativity g^2/(kappa*Gamma) at a fixed kappa/Gamma.

        The atomic branching is split evenly (Gamma0 = Gamma1) and all three
        lasers get the same amplitude omega (in units of g).
        """
        if not (c > 0 and kappa_over_gamma > 0 and g > 0):
            raise DomainError("c, kappa_over_gamma and g must be positive")
        gamma = g / math.sqrt(kappa_over_gamma * c)
        return cls(
            gamma0=0.5 * gamma,
            gamma1=0.5 * gamma,
            kappa=kappa_over_gamma * gamma,
            omega01=omega * g,
            omega02=omega * g,
            omega1l=omega * g,
            g=g,
            n_max=n_max,
        )


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """Single-atom cooperativity g^2/(kappa*Gamma)."""
    if kappa <= 0 or gamma <= 0:
        raise DomainError(f"kappa and gamma must be positive, got {kappa}, {gamma}")
    return g * g / (kappa * gamma)


@dataclass(frozen=True)
class LaserConfig:
    """Laser detunings relative to the rotating frame.

    d1 = wL0_1 - w2, d2 = wL0_2 - w2, d3 = wL1 - (w2 - w1).
    """

    d1: float
    d2: float
    d3: float

    @classmethod
    def resonant(cls, g: float = 1.0) -> "LaserConfig":
        """The canonical assignment (-g, 0, -sqrt(2) g)."""
        return cls(d1=-g, d2=0.0, d3=-SQRT2 * g)


@dataclass(eq=False)
class JumpChannel:
    """One collapse channel: bare transition operator plus its rate."""

    label: str
    rate: float
    operator: np.ndarray

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """sqrt(rate) * operator @ psi, the unnormalized post-jump state."""
        return math.sqrt(self.rate) * (self.operator @ psi)


def jump_channels(params: CavityParams, space: HilbertSpace | None = None) -> list[JumpChannel]:
    """The five collapse channels: 2->0 and 2->1 on each atom, plus photon loss."""
    space = space or HilbertSpace(params.n_max)
    return [
        JumpChannel("atom1->0", params.gamma0, atom_transition(space, 1, 0, 2)),
        JumpChannel("atom1->1", params.gamma1, atom_transition(space, 1, 1, 2)),
        JumpChannel("atom2->0", params.gamma0, atom_transition(space, 2, 0, 2)),
        JumpChannel("atom2->1", params.gamma1, atom_transition(space, 2, 1, 2)),
        JumpChannel("cavity", params.kappa, annihilation(space)),
    ]


class _System:
    """Precomputed operators for one (params, config) pair."""

    def __init__(self, params: CavityParams, cfg: LaserConfig, space: HilbertSpace | None = None):
        self.params = params
        self.cfg = cfg
        self.space = space or HilbertSpace(params.n_max)
        self.dim = self.space.dim
        sp = self.space
        c = annihilation(sp)
        b12 = atom_transition(sp, 1, 1, 2) + atom_transition(sp, 2, 1, 2)
        b02 = atom_transition(sp, 1, 0, 2) + atom_transition(sp, 2, 0, 2)
        jc = params.g * (b12 @ dagger(c))
        self.h_jc = jc + dagger(jc)
        self.b02 = b02
        self.b12 = b12
        p2 = atom_transition(sp, 1, 2, 2) + atom_transition(sp, 2, 2, 2)
        nop = dagger(c) @ c
        self.decay_diag = (params.gamma * np.diag(p2) + params.kappa * np.diag(nop)).real
        self.channels = jump_channels(params, sp)
        self.plus = plus_state(sp)
        self._eye = np.eye(self.dim, dtype=complex)
        self._reset_slices = self._build_reset_slices()
        # drive entries live at fixed disjoint positions; per-stage rebuilds only
        # write these flat indices instead of forming full drive matrices
        self._i02 = np.flatnonzero(b02)
        self._i02c = np.flatnonzero(b02.T)
        self._i12 = np.flatnonzero(b12)
        self._i12c = np.flatnonzero(b12.T)
        a_static = -1j * self.h_jc
        a_static.flat[:: self.dim + 1] -= 0.5 * self.decay_diag
        self._a_static = a_static

    def _build_reset_slices(self):
        """Index machinery for applying L rho L^dagger terms by fancy indexing."""
        sp = self.space
        npho = sp.n_photon
        slices = []
        for atom in (1, 2):
            for target, rate in ((0, self.params.gamma0), (1, self.params.gamma1)):
                src, dst = [], []
                for other in range(3):
                    for n in range(npho):
                        j1, j2 = (2, other) if atom == 1 else (other, 2)
                        k1, k2 = (target, other) if atom == 1 else (other, target)
                        src.append(sp.index(j1, j2, n))
                        dst.append(sp.index(k1, k2, n))
                slices.append((rate, np.ix_(dst, dst), np.ix_(src, src), None))
        src, dst, w = [], [], []
        for j1 in range(3):
            for j2 in range(3):
                for n in range(1, npho):
                    src.append(sp.index(j1, j2, n))
                    dst.append(sp.index(j1, j2, n - 1))
                    w.append(math.sqrt(n))
        w = np.array(w)
        slices.append((self.params.kappa, np.ix_(dst, dst), np.ix_(src, src), np.outer(w, w)))
        return slices

    def amplitudes(self, t: float, schedule: PulseSchedule | None):
        if schedule is None:
            p = self.params
            return p.omega01, p.omega02, p.omega1l
        om = schedule.omega_at(t)
        return om, om, om

    def drive_coeffs(self, t: float, schedule: PulseSchedule | None):
        a1, a2, a3 = self.amplitudes(t, schedule)
        cfg = self.cfg
        c02 = 0.5 * (a1 * np.exp(1j * cfg.d1 * t) + a2 * np.exp(1j * cfg.d2 * t))
        c12 = 0.5 * a3 * np.exp(1j * cfg.d3 * t)
        return c02, c12

    def hamiltonian(self, t: float, schedule: PulseSchedule | None = None) -> np.ndarray:
        c02, c12 = self.drive_coeffs(t, schedule)
        h = self.h_jc.copy()
        h.flat[self._i02] += c02
        h.flat[self._i02c] += np.conj(c02)
        h.flat[self._i12] += c12
        h.flat[self._i12c] += np.conj(c12)
        return h

    def nojump_generator(self, t: float, schedule: PulseSchedule | None = None) -> np.ndarray:
        """A(t) with dpsi/dt = A psi between jumps: -i H_cond(t)."""
        c02, c12 = self.drive_coeffs(t, schedule)
        a = self._a_static.copy()
        a.flat[self._i02] += -1j * c02
        a.flat[self._i02c] += -1j * np.conj(c02)
        a.flat[self._i12] += -1j * c12
        a.flat[self._i12c] += -1j * np.conj(c12)
        return a

    def rk4_propagator(self, t: float, h: float, schedule: PulseSchedule | None = None) -> np.ndarray:
        """One RK4 step of the no-jump evolution as a linear map."""
        a1 = self.nojump_generator(t, schedule)
        am = self.nojump_generator(t + 0.5 * h, schedule)
        a2 = self.nojump_generator(t + h, schedule)
        k2 = am + (0.5 * h) * (am @ a1)
        k3 = am + (0.5 * h) * (am @ k2)
        k4 = a2 + h * (a2 @ k3)
        return self._eye + (h / 6.0) * (a1 + 2.0 * k2 + 2.0 * k3 + k4)

    def rk4_apply(self, t: float, h: float, psi: np.ndarray, schedule: PulseSchedule | None = None) -> np.ndarray:
        """One RK4 step applied to a single state vector."""
        a1 = self.nojump_generator(t, schedule)
        am = self.nojump_generator(t + 0.5 * h, schedule)
        a2 = self.nojump_generator(t + h, schedule)
        k1 = a1 @ psi
        k2 = am @ (psi + 0.5 * h * k1)
        k3 = am @ (psi + 0.5 * h * k2)
        k4 = a2 @ (psi + h * k3)
        return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hamiltonian(
    t: float,
    params: CavityParams,
    cfg: LaserConfig,
    schedule: PulseSchedule | None = None,
) -> np.ndarray:
    """Rotating-frame Hamiltonian H(t)/hbar (Hermitian at every t)."""
    return _System(params, cfg).hamiltonian(t, schedule)


def conditional_hamiltonian(
    t: float,
    params: CavityParams,
    cfg: LaserConfig,
    schedule: PulseSchedule | None = None,
) -> np.ndarray:
    """No-emission generator H(t) - (i/2)(Gamma sum_i |2><2|_i + kappa c^dag c)."""
    system = _System(params, cfg)
    h = system.hamiltonian(t, schedule)
    h.flat[:: system.dim + 1] -= 0.5j * system.decay_diag
    return h


def analytic_predictions(params: CavityParams) -> tuple[float, float]:
    """Closed-form (cooling rate, stationary fidelity) for equal Rabi amplitudes.

    Obtained from the toy-model forms with the decay rate replaced by
    (kappa+Gamma)/2 and the detuning by (sqrt(2)-1) g.
    """
    if not (params.omega01 == params.omega02 == params.omega1l):
        raise DomainError(
            "analytic predictions require all three Rabi amplitudes equal, got "
            f"({params.omega01}, {params.omega02}, {params.omega1l})"
        )
    if params.g <= 0:
        raise DomainError("analytic predictions require g > 0")
    om = params.omega01
    total = params.kappa + params.gamma
    if om == 0 and total == 0:
        gamma_c = 0.0
    else:
        gamma_c = 2.0 * om**2 * total / (12.0 * om**2 + total**2)
    fidelity = 1.0 - (12.0 * om**2 + total**2) / (16.0 * (SQRT2 - 1.0) ** 2 * params.g**2)
    return gamma_c, fidelity


def cavity_pulse(params: CavityParams, omega0: float) -> PulseSchedule:
    """Ramp schedule for the cavity scheme: 6*omega0/(1+gamma_c(0) t)^2."""
    if not omega0 > 0:
        raise DomainError("omega0 must be positive")
    total = params.kappa + params.gamma
    gc0 = 2.0 * omega0**2 * total / (12.0 * omega0**2 + total**2)
    return PulseSchedule(omega0=omega0, gamma_c0=gc0, multiplier=6.0)


def derive_trajectory_seed(master_seed: int, index: int) -> int:
    """Deterministic per-trajectory seed, independent of execution order."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


@dataclass
class TrajectoryResult:
    """One unravelled trajectory: observable samples and the jump log."""

    seed: int
    times: np.ndarray
    fidelity: np.ndarray
    jumps: list[tuple[float, str]] = field(default_factory=list)


@dataclass
class EnsembleResult:
    """Seeded trajectory ensemble with per-sample mean and standard error."""

    times: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    n_traj: int
    master_seed: int
    trajectory_fidelity: np.ndarray  # shape (n_traj, len(times))


@dataclass
class MasterResult:
    """Density-matrix evolution: observable samples and worst trace drift."""

    times: np.ndarray
    fidelity: np.ndarray
    trace_error: float


def _default_grid(params: CavityParams, sample_dt: float | None, dt: float | None):
    """Fill in the default sampling stride and step (units of 1/g)."""
    scale = params.g if params.g > 0 else 1.0
    if sample_dt is None:
        sample_dt = DEFAULT_SAMPLE_DT / scale
    if dt is None:
        dt = DEFAULT_DT / scale
    return sample_dt, dt


def _sample_grid(t_end: float, sample_dt: float, dt: float):
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    if not 0 < dt <= sample_dt:
        raise DomainError(f"need 0 < dt <= sample_dt, got dt={dt}, sample_dt={sample_dt}")
    n_samples = int(round(t_end / sample_dt))
    if n_samples < 1 or abs(n_samples * sample_dt - t_end) > 1e-9 * max(1.0, t_end):
        raise DomainError(f"t_end={t_end} must be a positive multiple of sample_dt={sample_dt}")
    times = np.arange(n_samples + 1) * sample_dt
    n_sub = max(1, math.ceil(sample_dt / dt - 1e-9))
    return times, n_sub, sample_dt / n_sub


def _column_norms2(psi: np.ndarray) -> np.ndarray:
    return (psi.real**2).sum(axis=0) + (psi.imag**2).sum(axis=0)


def _record(system: _System, psi: np.ndarray, norms2: np.ndarray, observable: np.ndarray | None) -> np.ndarray:
    if observable is None:
        overlap = system.plus.conj() @ psi
        return (overlap.real**2 + overlap.imag**2) / norms2
    vals = np.einsum("ij,ij->j", psi.conj(), observable @ psi).real
    return vals / norms2


def _resolve_jumps(
    system: _System,
    psi_start: np.ndarray,
    t0: float,
    h: float,
    threshold: float,
    norm2_start: float,
    rng: np.random.Generator,
    schedule: PulseSchedule | None,
    log: list | None,
) -> tuple[np.ndarray, float]:
    """Re-integrate one step of a column whose norm crossed its jump threshold.

    The jump time is located by linear interpolation of the squared norm across
    the step; the channel is sampled with probability rate*|L psi|^2; integration
    restarts from the interpolated time with a fresh threshold.
    """
    t_cur, h_rem = t0, h
    psi, n_cur, r = psi_start, norm2_start, threshold
    for _ in range(_MAX_JUMPS_PER_STEP):
        psi_end = system.rk4_apply(t_cur, h_rem, psi, schedule)
        n_end = float(_column_norms2(psi_end[:, None])[0])
        if n_end > r:
            return psi_end, r
        frac = (n_cur - r) / (n_cur - n_end)
        h_jump = frac * h_rem
        psi_jump = psi_end if frac >= 1.0 else system.rk4_apply(t_cur, h_jump, psi, schedule)
        t_jump = t_cur + h_jump

        weights = np.empty(len(system.channels))
        post = []
        for k, ch in enumerate(system.channels):
            v = ch.operator @ psi_jump
            post.append(v)
            weights[k] = ch.rate * float(_column_norms2(v[:, None])[0])
        total = weights.sum()
        if total <= 0.0:
            # norm loss without any open channel: numerically unreachable, keep going
            return psi_end, r
        pick = int(np.searchsorted(np.cumsum(weights), rng.random() * total))
        pick = min(pick, len(post) - 1)
        psi = post[pick] / math.sqrt(float(_column_norms2(post[pick][:, None])[0]))
        if log is not None:
            log.append((t_jump, system.channels[pick].label))
        r = rng.random()
        n_cur = 1.0
        h_rem = (t0 + h) - t_jump
        t_cur = t_jump
        if h_rem <= 0.0:
            return psi, r
    raise StepSizeError(f"more than {_MAX_JUMPS_PER_STEP} jumps in one step at t={t0:g}")


def _evolve_jump_batch(
    system: _System,
    psi0: np.ndarray,
    t_end: float,
    dt: float,
    sample_dt: float,
    seeds: list[int],
    schedule: PulseSchedule | None,
    observable: np.ndarray | None,
    keep_logs: bool,
):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (system.dim,):
        raise DomainError(f"psi0 must have shape ({system.dim},), got {psi0.shape}")
    norm0 = float(_column_norms2(psi0[:, None])[0])
    if abs(norm0 - 1.0) > 1e-9:
        raise DomainError(f"psi0 must be normalized, |psi0|^2 = {norm0!r}")
    max_decay = float(system.decay_diag.max())
    if max_decay > 0 and dt * max_decay > MAX_STEP_DECAY_PROB:
        raise StepSizeError(
            f"dt={dt:g} gives per-step decay probability {dt * max_decay:.3g} "
            f"> {MAX_STEP_DECAY_PROB}; reduce dt below {MAX_STEP_DECAY_PROB / max_decay:.3g}"
        )
    times, n_sub, h = _sample_grid(t_end, sample_dt, dt)

    n_traj = len(seeds)
    rngs = [np.random.default_rng(s) for s in seeds]
    thresholds = np.array([rng.random() for rng in rngs])
    psi = np.tile(psi0[:, None], (1, n_traj))
    norms2 = _column_norms2(psi)
    logs = [[] for _ in range(n_traj)] if keep_logs else [None] * n_traj

    values = np.empty((n_traj, len(times)))
    values[:, 0] = _record(system, psi, norms2, observable)

    for k in range(len(times) - 1):
        t_base = times[k]
        for j in range(n_sub):
            t0 = t_base + j * h
            prop = system.rk4_propagator(t0, h, schedule)
            psi_next = prop @ psi
            n_next = _column_norms2(psi_next)
            if np.any(n_next > norms2 * (1.0 + NORM_RISE_LIMIT)):
                worst = float((n_next / norms2).max())
                raise StepSizeError(
                    f"norm increased by factor {worst!r} in one step at t={t0:g}; reduce dt"
                )
            triggered = np.nonzero(n_next <= thresholds)[0]
            for col in triggered:
                psi_col, r_new = _resolve_jumps(
                    system, psi[:, col], t0, h, float(thresholds[col]),
                    float(norms2[col]), rngs[col], schedule, logs[col],
                )
                psi_next[:, col] = psi_col
                thresholds[col] = r_new
                n_next[col] = float(_column_norms2(psi_col[:, None])[0])
            psi = psi_next
            norms2 = n_next
        values[:, k + 1] = _record(system, psi, norms2, observable)

    return times, values, logs


def evolve_trajectory(
    psi0: np.ndarray,
    params: CavityParams,
    cfg: LaserConfig,
    t_end: float,
    dt: float | None = None,
    seed: int = 0,
    schedule: PulseSchedule | None = None,
    sample_dt: float | None = None,
    observable: np.ndarray | None = None,
) -> TrajectoryResult:
    """Single quantum-jump trajectory.

    Between jumps the state follows dpsi/dt = -i H_cond(t) psi without
    renormalization; a pre-drawn uniform threshold r triggers a jump when
    |psi|^2 <= r, with the jump time interpolated inside the triggering step.
    The recorded samples are |<+,0|psi>|^2 of the normalized state unless a
    custom Hermitian observable is supplied.
    """
    system = _System(params, cfg)
    sample_dt, dt = _default_grid(params, sample_dt, dt)
    times, values, logs = _evolve_jump_batch(
        system, psi0, t_end, dt, sample_dt, [seed], schedule, observable, keep_logs=True
    )
    return TrajectoryResult(seed=seed, times=times, fidelity=values[0], jumps=logs[0])


def ensemble_average(
    psi0: np.ndarray,
    params: CavityParams,
    cfg: LaserConfig,
    t_end: float,
    n_traj: int,
    master_seed: int = 0,
    dt: float | None = None,
    schedule: PulseSchedule | None = None,
    sample_dt: float | None = None,
    observable: np.ndarray | None = None,
) -> EnsembleResult:
    """Seeded trajectory ensemble evolved as one batch.

    Per-trajectory seeds derive deterministically from (master_seed, index), and
    the reduction is a fixed-order numpy mean, so the result does not depend on
    execution order or thread count; n_traj = 1 reproduces evolve_trajectory
    with the index-0 derived seed bit for bit.
    """
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    system = _System(params, cfg)
    sample_dt, dt = _default_grid(params, sample_dt, dt)
    seeds = [derive_trajectory_seed(master_seed, i) for i in range(n_traj)]
    times, values, _ = _evolve_jump_batch(
        system, psi0, t_end, dt, sample_dt, seeds, schedule, observable, keep_logs=False
    )
    mean = values.mean(axis=0)
    if n_traj > 1:
        stderr = values.std(axis=0, ddof=1) / math.sqrt(n_traj)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(
        times=times,
        fidelity=mean,
        stderr=stderr,
        n_traj=n_traj,
        master_seed=master_seed,
        trajectory_fidelity=values,
    )


def master_equation_evolve(
    rho0: np.ndarray,
    params: CavityParams,
    cfg: LaserConfig,
    t_end: float,
    dt: float | None = None,
    schedule: PulseSchedule | None = None,
    sample_dt: float | None = None,
    observable: np.ndarray | None = None,
) -> MasterResult:
    """RK4 integration of the master equation; oracle for the jump ensemble.

    drho/dt = -i(H_cond rho - rho H_cond^dag) + sum_k rate_k L_k rho L_k^dag,
    with the same rotating-frame H_cond as the trajectory solver. The trace is
    conserved identically by the equation; drift beyond 1e-6 aborts the run.
    """
    system = _System(params, cfg)
    sample_dt, dt = _default_grid(params, sample_dt, dt)
    dim = system.dim
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (dim, dim):
        raise DomainError(f"rho0 must have shape ({dim},{dim}), got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise DomainError("rho0 must be Hermitian within 1e-10")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise DomainError("rho0 must have unit trace within 1e-10")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise DomainError("rho0 must be positive semidefinite within 1e-10")

    times, n_sub, h = _sample_grid(t_end, sample_dt, dt)
    resets = system._reset_slices

    def deriv(m: np.ndarray, r: np.ndarray) -> np.ndarray:
        # for Hermitian r, -i(H_cond r - r H_cond^dag) = M r + (M r)^dag with
        # M = -i H_cond; RK4 stages stay Hermitian so this holds throughout
        mr = m @ r
        out = mr + mr.conj().T
        for rate, dst, src, wmat in resets:
            if rate == 0.0:
                continue
            block = r[src]
            out[dst] += rate * block if wmat is None else rate * (wmat * block)
        return out

    def sample(r: np.ndarray) -> float:
        if observable is None:
            return float(np.vdot(system.plus, r @ system.plus).real)
        return float(np.einsum("ij,ji->", observable, r).real)

    fidelity = np.empty(len(times))
    fidelity[0] = sample(rho)
    worst_drift = abs(float(np.trace(rho).real) - 1.0)

    for k in range(len(times) - 1):
        t_base = times[k]
        for j in range(n_sub):
            t = t_base + j * h
            m1 = system.nojump_generator(t, schedule)
            mm = system.nojump_generator(t + 0.5 * h, schedule)
            m2 = system.nojump_generator(t + h, schedule)
            k1 = deriv(m1, rho)
            k2 = deriv(mm, rho + 0.5 * h * k1)
            k3 = deriv(mm, rho + 0.5 * h * k2)
            k4 = deriv(m2, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            drift = abs(float(np.trace(rho).real) - 1.0)
            if drift > TRACE_DRIFT_LIMIT:
                raise StepSizeError(
                    f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT:g} at t={t + h:g}"
                )
            worst_drift = max(worst_drift, drift)
        fidelity[k + 1] = sample(rho)

    return MasterResult(times=times, fidelity=fidelity, trace_error=worst_drift)


def window_mask(times: np.ndarray, fraction: float = 0.25) -> np.ndarray:
    """Boolean mask selecting the final `fraction` of the run."""
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must be in (0, 1], got {fraction}")
    return times >= (1.0 - fraction) * times[-1]


def ensemble_window_stats(
    result: EnsembleResult, fraction: float = 0.25
) -> tuple[float, float, float]:
    """(mean, stderr, halves gap) of the fidelity over the stationary window.

    The stderr comes from the spread of per-trajectory window means, which are
    independent samples; the halves gap compares the two halves of the window
    as a stationarity diagnostic.
    """
    mask = window_mask(result.times, fraction)
    per_traj = result.trajectory_fidelity[:, mask].mean(axis=1)
    mean = float(per_traj.mean())
    stderr = (
        float(per_traj.std(ddof=1) / math.sqrt(result.n_traj)) if result.n_traj > 1 else 0.0
    )
    idx = np.nonzero(mask)[0]
    half = len(idx) // 2
    gap = abs(
        float(result.fidelity[idx[:half]].mean()) - float(result.fidelity[idx[half:]].mean())
    )
    return mean, stderr, gap


def master_window_stats(result: MasterResult, fraction: float = 0.25) -> tuple[float, float]:
    """(mean, halves gap) of the fidelity over the stationary window."""
    mask = window_mask(result.times, fraction)
    idx = np.nonzero(mask)[0]
    half = len(idx) // 2
    vals = result.fidelity
    gap = abs(float(vals[idx[:half]].mean()) - float(vals[idx[half:]].mean()))
    return float(vals[mask].mean()), gap
