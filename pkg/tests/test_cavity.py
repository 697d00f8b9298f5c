import numpy as np
import pytest

from cavcool import (
    CavityParams,
    DomainError,
    HilbertSpace,
    LaserConfig,
    StepSizeError,
    analytic_predictions,
    atom_transition,
    cavity_pulse,
    conditional_hamiltonian,
    cooperativity,
    creation,
    annihilation,
    derive_trajectory_seed,
    ensemble_average,
    ensemble_window_stats,
    evolve_trajectory,
    hamiltonian,
    jump_channels,
    master_equation_evolve,
    master_window_stats,
    plus_state,
)
from cavcool.cavity import _System

SQRT2 = np.sqrt(2.0)
CANON = CavityParams.with_cooperativity(25.0, omega=0.03, kappa_over_gamma=2.0, n_max=3)
CFG = LaserConfig.resonant(1.0)


def pure_density(psi):
    return np.outer(psi, psi.conj())


class TestParams:
    def test_with_cooperativity(self):
        assert CANON.gamma == pytest.approx(1 / np.sqrt(50.0), abs=1e-15)
        assert CANON.kappa == pytest.approx(2 / np.sqrt(50.0), abs=1e-15)
        assert CANON.cooperativity == pytest.approx(25.0, abs=1e-12)
        assert CANON.gamma0 == CANON.gamma1

    def test_cooperativity_examples(self):
        assert cooperativity(1.0, 2 / np.sqrt(50.0), 1 / np.sqrt(50.0)) == pytest.approx(25.0)
        # degree-zero homogeneity: scaling all three rates leaves C unchanged
        assert cooperativity(3.0, 6 / np.sqrt(50.0), 3 / np.sqrt(50.0)) == pytest.approx(25.0)
        with pytest.raises(DomainError):
            cooperativity(1.0, 0.0, 0.1)

    def test_validation(self):
        with pytest.raises(DomainError):
            CavityParams(gamma0=-0.1, gamma1=0.1, kappa=0.1)
        with pytest.raises(DomainError):
            CavityParams.with_cooperativity(0.0)

    def test_resonant_config(self):
        assert (CFG.d1, CFG.d2, CFG.d3) == (-1.0, 0.0, -SQRT2)


class TestHamiltonian:
    def test_hermitian_at_random_times(self, rng):
        for t in rng.uniform(0.0, 100.0, size=5):
            h = hamiltonian(float(t), CANON, CFG)
            assert np.max(np.abs(h - h.conj().T)) < 1e-14

    def test_dark_target_with_lasers_off(self, space):
        p = CavityParams(gamma0=CANON.gamma0, gamma1=CANON.gamma1, kappa=CANON.kappa)
        h = hamiltonian(0.0, p, CFG)
        assert np.max(np.abs(h @ plus_state(space))) == 0.0
        assert np.max(np.abs(h[space.index(0, 0, 0)])) == 0.0

    def test_drive_matrix_element(self, space):
        h = hamiltonian(0.0, CANON, CFG)
        el = h[space.index(2, 0, 0), space.index(0, 0, 0)]
        assert el == pytest.approx((CANON.omega01 + CANON.omega02) / 2, abs=1e-15)

    def test_conditional_imaginary_parts(self, space):
        hc = conditional_hamiltonian(0.0, CANON, CFG)
        assert hc[space.index(2, 0, 0), space.index(2, 0, 0)].imag == pytest.approx(
            -CANON.gamma / 2
        )
        assert hc[space.index(0, 0, 1), space.index(0, 0, 1)].imag == pytest.approx(
            -CANON.kappa / 2
        )
        plus = plus_state(space)
        assert np.vdot(plus, hc @ plus).imag == 0.0

    def test_antihermitian_part_negative_semidefinite(self):
        hc = conditional_hamiltonian(0.7, CANON, CFG)
        anti = (hc - hc.conj().T) / 2j
        assert np.linalg.eigvalsh(anti).max() <= 1e-14

    def test_schedule_scales_all_three_lasers(self, space):
        sched = cavity_pulse(CANON, omega0=0.015)
        h = hamiltonian(0.0, CANON, CFG, schedule=sched)
        el = h[space.index(2, 0, 0), space.index(0, 0, 0)].real
        assert el == pytest.approx(6 * 0.015, abs=1e-12)  # two lasers at 0.09/2 each


class TestJumpChannels:
    def test_actions(self, space):
        chans = {c.label: c for c in jump_channels(CANON, space)}
        out = chans["cavity"].apply(space.basis_state(0, 0, 1))
        assert np.allclose(out, np.sqrt(CANON.kappa) * space.basis_state(0, 0, 0))
        out = chans["atom1->1"].apply(space.basis_state(2, 0, 0))
        assert np.allclose(out, np.sqrt(CANON.gamma1) * space.basis_state(1, 0, 0))

    def test_completeness(self, space):
        total = sum(
            c.rate * (c.operator.conj().T @ c.operator) for c in jump_channels(CANON, space)
        )
        expected = CANON.gamma * (
            atom_transition(space, 1, 2, 2) + atom_transition(space, 2, 2, 2)
        ) + CANON.kappa * (creation(space) @ annihilation(space))
        assert np.max(np.abs(total - expected)) < 1e-12


class TestAnalytic:
    def test_reference_values(self):
        gc, f = analytic_predictions(CANON)
        assert gc == pytest.approx(0.004002491214263476, abs=1e-15)
        assert f == pytest.approx(0.9304960065374017, abs=1e-15)

    def test_requires_equal_amplitudes(self):
        p = CavityParams(gamma0=0.1, gamma1=0.1, kappa=0.2, omega01=0.03, omega02=0.02, omega1l=0.03)
        with pytest.raises(DomainError):
            analytic_predictions(p)

    def test_lossless_weak_drive_limit(self):
        p = CavityParams(gamma0=0.0, gamma1=0.0, kappa=0.0, omega01=0.0, omega02=0.0, omega1l=0.0)
        _, f = analytic_predictions(p)
        assert f == 1.0

    def test_cavity_pulse(self):
        sched = cavity_pulse(CANON, 0.015)
        total = CANON.kappa + CANON.gamma
        expect = 2 * 0.015**2 * total / (12 * 0.015**2 + total**2)
        assert sched.gamma_c0 == pytest.approx(expect, abs=1e-15)
        assert sched.multiplier == 6.0


class TestTrajectory:
    def test_dark_target_stationary(self, space):
        p = CavityParams(gamma0=CANON.gamma0, gamma1=CANON.gamma1, kappa=CANON.kappa)
        res = evolve_trajectory(plus_state(space), p, CFG, t_end=50.0, seed=3)
        assert res.jumps == []
        assert np.all(res.fidelity == res.fidelity[0])
        assert abs(res.fidelity[0] - 1.0) <= 1e-15

    def test_atomic_decay_ensemble(self):
        # g = 0, lasers off: pure exponential decay of the excited atom
        sp = HilbertSpace(0)
        p = CavityParams(gamma0=0.5, gamma1=0.5, kappa=0.0, g=0.0, n_max=0)
        proj2 = atom_transition(sp, 1, 2, 2)
        ens = ensemble_average(
            sp.basis_state(2, 0, 0), p, CFG, t_end=4.0, n_traj=10_000, master_seed=11,
            dt=0.02, sample_dt=0.5, observable=proj2,
        )
        expected = np.exp(-p.gamma * ens.times)
        assert np.all(np.abs(ens.fidelity - expected) <= 3 * ens.stderr + 1e-9)

    def test_cavity_decay_ensemble(self, space1):
        p = CavityParams(gamma0=0.0, gamma1=0.0, kappa=1.0, g=0.0, n_max=1)
        nop = creation(space1) @ annihilation(space1)
        ens = ensemble_average(
            space1.basis_state(0, 0, 1), p, CFG, t_end=3.0, n_traj=10_000, master_seed=12,
            dt=0.02, sample_dt=0.5, observable=nop,
        )
        expected = np.exp(-p.kappa * ens.times)
        assert np.all(np.abs(ens.fidelity - expected) <= 3 * ens.stderr + 1e-9)

    def test_jump_log_records_channel(self, space1):
        p = CavityParams(gamma0=0.5, gamma1=0.5, kappa=0.0, g=0.0, n_max=1)
        res = evolve_trajectory(space1.basis_state(2, 2, 0), p, CFG, t_end=20.0, dt=0.02, seed=5)
        assert len(res.jumps) == 2
        for t, label in res.jumps:
            assert 0.0 < t < 20.0
            assert label.startswith("atom")

    def test_seed_determinism(self, space1):
        # dissipation strong enough that jumps actually occur within the run
        p = CavityParams(gamma0=0.25, gamma1=0.25, kappa=0.5,
                         omega01=0.2, omega02=0.2, omega1l=0.2, n_max=1)
        psi0 = space1.basis_state(0, 0, 0)
        a = ensemble_average(psi0, p, CFG, t_end=30.0, n_traj=8, master_seed=42)
        b = ensemble_average(psi0, p, CFG, t_end=30.0, n_traj=8, master_seed=42)
        assert np.array_equal(a.fidelity, b.fidelity)
        assert np.array_equal(a.trajectory_fidelity, b.trajectory_fidelity)
        c = ensemble_average(psi0, p, CFG, t_end=30.0, n_traj=8, master_seed=43)
        assert not np.array_equal(a.trajectory_fidelity, c.trajectory_fidelity)

    def test_single_trajectory_matches_ensemble_of_one(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        psi0 = space1.basis_state(0, 0, 0)
        ens = ensemble_average(psi0, p, CFG, t_end=40.0, n_traj=1, master_seed=9)
        single = evolve_trajectory(psi0, p, CFG, t_end=40.0, seed=derive_trajectory_seed(9, 0))
        assert np.array_equal(ens.trajectory_fidelity[0], single.fidelity)

    def test_norm_monotone_between_jumps(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        sys = _System(p, CFG)
        psi = space1.basis_state(0, 0, 0)
        norms = [1.0]
        t, h = 0.0, 0.005
        for _ in range(2000):
            psi = sys.rk4_apply(t, h, psi)
            t += h
            norms.append(float(np.vdot(psi, psi).real))
        diffs = np.diff(norms)
        assert np.all(diffs <= 1e-15)

    def test_requires_normalized_state(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        with pytest.raises(DomainError):
            evolve_trajectory(2.0 * space1.basis_state(0, 0, 0), p, CFG, t_end=5.0)

    def test_step_decay_probability_enforced(self, space1):
        p = CavityParams(gamma0=5.0, gamma1=5.0, kappa=5.0, n_max=1)
        with pytest.raises(StepSizeError):
            evolve_trajectory(space1.basis_state(0, 0, 0), p, CFG, t_end=5.0, dt=0.01)

    def test_t_end_must_align_with_samples(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        with pytest.raises(DomainError):
            evolve_trajectory(space1.basis_state(0, 0, 0), p, CFG, t_end=5.5, sample_dt=1.0)


class TestMasterEquation:
    def test_dark_target_constant(self, space1):
        p = CavityParams(gamma0=CANON.gamma0, gamma1=CANON.gamma1, kappa=CANON.kappa, n_max=1)
        res = master_equation_evolve(pure_density(plus_state(space1)), p, CFG, t_end=20.0)
        assert np.all(res.fidelity == res.fidelity[0])
        assert abs(res.fidelity[0] - 1.0) <= 1e-15

    def test_atomic_decay_closed_form(self):
        sp = HilbertSpace(0)
        p = CavityParams(gamma0=0.5, gamma1=0.5, kappa=0.0, g=0.0, n_max=0)
        proj2 = atom_transition(sp, 1, 2, 2)
        res = master_equation_evolve(
            pure_density(sp.basis_state(2, 0, 0)), p, CFG, t_end=5.0, dt=0.01,
            sample_dt=0.5, observable=proj2,
        )
        assert np.max(np.abs(res.fidelity - np.exp(-p.gamma * res.times))) < 1e-8

    def test_trace_conserved(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        rho0 = pure_density(space1.basis_state(0, 0, 0))
        res = master_equation_evolve(rho0, p, CFG, t_end=50.0)
        assert res.trace_error < 1e-8

    def test_rho0_validation(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        dim = space1.dim
        bad = np.zeros((dim, dim), complex)
        bad[0, 1] = 1.0
        with pytest.raises(DomainError):
            master_equation_evolve(bad, p, CFG, t_end=5.0)
        off_trace = np.eye(dim, dtype=complex) / (dim - 1)
        with pytest.raises(DomainError):
            master_equation_evolve(off_trace, p, CFG, t_end=5.0)
        negative = np.zeros((dim, dim), complex)
        negative[0, 0], negative[1, 1] = 1.5, -0.5
        with pytest.raises(DomainError):
            master_equation_evolve(negative, p, CFG, t_end=5.0)


class TestWindows:
    def test_master_window_stats(self):
        from cavcool.cavity import MasterResult

        times = np.arange(101.0)
        fid = np.where(times < 75, 0.5, 0.9)
        res = MasterResult(times=times, fidelity=fid, trace_error=0.0)
        mean, gap = master_window_stats(res, fraction=0.25)
        assert mean == pytest.approx(0.9)
        assert gap == pytest.approx(0.0)

    def test_ensemble_window_stats(self, space1):
        p = CavityParams.with_cooperativity(25.0, n_max=1)
        ens = ensemble_average(
            space1.basis_state(0, 0, 0), p, CFG, t_end=40.0, n_traj=16, master_seed=2
        )
        mean, stderr, gap = ensemble_window_stats(ens)
        mask = ens.times >= 30.0
        assert mean == pytest.approx(float(ens.trajectory_fidelity[:, mask].mean()))
        assert stderr > 0.0


class TestSeeds:
    def test_derive_trajectory_seed_stable(self):
        assert derive_trajectory_seed(7, 0) == derive_trajectory_seed(7, 0)
        seen = {derive_trajectory_seed(7, i) for i in range(100)}
        assert len(seen) == 100
        assert derive_trajectory_seed(8, 0) != derive_trajectory_seed(7, 0)
