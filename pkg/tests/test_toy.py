import numpy as np
import pytest

from cavcool import (
    DegenerateModelError,
    DomainError,
    PulseSchedule,
    StepSizeError,
    ToyParams,
    cooling_rate,
    cooling_rate_approx,
    fitted_decay_rate,
    heating_rate,
    initial_state,
    integrate,
    max_fidelity,
    pulse_omega,
    rate_rhs,
    stationary_fidelity,
    stationary_fidelity_large_delta,
    stationary_solve,
    transient_population,
)
from cavcool.toy import K02, K13, L02, P0, P1, P2, P3, rate_matrix

REF = ToyParams(omega=0.05, delta=1.0, gamma=0.2)


def random_params(rng, n):
    for _ in range(n):
        yield ToyParams(
            omega=float(rng.uniform(0.005, 0.5)),
            delta=1.0,
            gamma=float(rng.uniform(0.005, 0.5)),
        )


def random_state(rng):
    p = rng.dirichlet(np.ones(4))
    coh = rng.uniform(-0.5, 0.5, size=3)
    return np.concatenate([p, coh])


class TestRateRhs:
    def test_stationary_state_has_zero_derivatives(self):
        s = stationary_solve(REF)
        assert np.max(np.abs(rate_rhs(s, REF))) < 1e-12

    def test_pure_level1(self):
        ds = rate_rhs(initial_state(1), REF)
        expected = np.zeros(7)
        expected[K13] = REF.omega
        assert np.allclose(ds, expected, atol=1e-15)

    def test_pure_level2_undriven(self):
        p = ToyParams(omega=0.0, delta=1.0, gamma=0.2)
        ds = rate_rhs(initial_state(2), p)
        assert ds[P0] == pytest.approx(0.1)
        assert ds[P1] == pytest.approx(0.1)
        assert ds[P2] == pytest.approx(-0.2)
        assert ds[P3] == 0.0

    def test_population_sum_conserved(self, rng):
        for p in random_params(rng, 20):
            ds = rate_rhs(random_state(rng), p)
            assert abs(ds[:4].sum()) < 1e-16

    def test_matrix_matches_rhs(self, rng):
        for p in random_params(rng, 5):
            s = random_state(rng)
            assert np.allclose(rate_matrix(p) @ s, rate_rhs(s, p))


class TestIntegrate:
    def test_undriven_target_is_constant(self):
        p = ToyParams(omega=0.0, delta=1.0, gamma=0.2)
        series = integrate(p, initial_state(0), t_end=50.0)
        assert np.array_equal(series.states[-1], series.states[0])

    def test_reaches_stationary_fidelity(self):
        series = integrate(REF, initial_state(1), t_end=2500.0)
        assert series.fidelity[-1] == pytest.approx(0.98839, abs=1e-4)

    def test_probability_conserved(self):
        series = integrate(REF, initial_state(1), t_end=2500.0)
        sums = series.states[:, :4].sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-9

    def test_step_too_large_rejected(self):
        with pytest.raises(StepSizeError):
            integrate(REF, initial_state(1), t_end=10.0, dt=0.06)

    def test_invalid_t_end(self):
        with pytest.raises(DomainError):
            integrate(REF, initial_state(1), t_end=0.0)

    def test_probability_drift_detected_for_late_blowup(self):
        # a schedule that explodes after t=0 defeats the entry dt check but is
        # caught by the in-flight probability monitor
        with pytest.raises(StepSizeError, match="drift"):
            integrate(
                REF, initial_state(1), t_end=50.0, dt=0.02,
                omega_t=lambda t: 0.05 if t < 5.0 else 300.0,
            )

    def test_fitted_rate_tracks_analytic_in_adiabatic_regime(self):
        # for delta >= 10 max(omega, gamma) the analytic gamma_c + gamma_h
        # upper-bounds the fitted relaxation rate and stays within a factor ~2
        # (the closed form counts decays that return to the initial state)
        for om, ga in ((0.05, 0.1), (0.1, 0.1), (0.1, 0.05)):
            p = ToyParams(omega=om, delta=1.0, gamma=ga)
            total = cooling_rate(p) + heating_rate(p)
            series = integrate(p, initial_state(1), t_end=float(16.0 / total))
            fit = fitted_decay_rate(series.times, series.fidelity, stationary_fidelity(p))
            assert fit <= total
            assert fit >= 0.4 * total

    def test_matches_bruteforce_lindblad_of_four_levels(self):
        # independent oracle: direct density-matrix integration of the
        # conditional-Hamiltonian/reset master equation
        om, de, ga = REF.omega, REF.delta, REF.gamma
        h = np.zeros((4, 4), complex)
        h[0, 2] = h[2, 0] = 0.5 * om
        h[1, 3] = h[3, 1] = 0.5 * om
        h[2, 2] = de
        lops = []
        for j in (2, 3):
            for i in (0, 1):
                l = np.zeros((4, 4))
                l[i, j] = 1.0
                lops.append(l)

        def rhs(rho):
            out = -1j * (h @ rho - rho @ h)
            for l in lops:
                out += (ga / 2) * (l @ rho @ l.T - 0.5 * (l.T @ l @ rho + rho @ l.T @ l))
            return out

        rho = np.zeros((4, 4), complex)
        rho[1, 1] = 1.0
        dt, t_end = 0.02, 60.0
        for _ in range(int(t_end / dt)):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * dt * k1)
            k3 = rhs(rho + 0.5 * dt * k2)
            k4 = rhs(rho + dt * k3)
            rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        series = integrate(REF, initial_state(1), t_end=t_end, dt=dt)
        end = series.states[-1]
        assert end[P0] == pytest.approx(rho[0, 0].real, abs=1e-12)
        assert end[P2] == pytest.approx(rho[2, 2].real, abs=1e-12)
        assert end[K02] == pytest.approx(2 * rho[0, 2].imag, abs=1e-12)
        assert end[L02] == pytest.approx(2 * rho[0, 2].real, abs=1e-12)


class TestStationary:
    def test_reference_values(self):
        s = stationary_solve(REF)
        assert s[P0] == pytest.approx(0.9883863080684596, abs=1e-12)
        assert stationary_fidelity(REF) == pytest.approx(0.9883863080684596, abs=1e-15)
        assert stationary_fidelity_large_delta(REF) == pytest.approx(0.988125, abs=1e-15)

    def test_strong_drive(self):
        p = ToyParams(omega=0.3, delta=1.0, gamma=0.2)
        assert stationary_fidelity(p) == pytest.approx(0.9301801801801802, abs=1e-15)
        assert stationary_solve(p)[P0] == pytest.approx(stationary_fidelity(p), abs=1e-12)

    def test_closed_form_exact_on_grid(self, rng):
        for p in random_params(rng, 40):
            assert abs(stationary_solve(p)[P0] - stationary_fidelity(p)) < 1e-12

    def test_degenerate_cases(self):
        with pytest.raises(DegenerateModelError, match="null space"):
            stationary_solve(ToyParams(omega=0.0, delta=1.0, gamma=0.2))
        with pytest.raises(DegenerateModelError, match="null space"):
            stationary_solve(ToyParams(omega=0.1, delta=1.0, gamma=0.0))

    def test_weak_drive_limit_approaches_max_fidelity(self):
        p = ToyParams(omega=1e-8, delta=1.0, gamma=0.2)
        assert stationary_fidelity(p) == pytest.approx(max_fidelity(1.0, 0.2), abs=1e-12)

    def test_monotonic_in_omega_and_gamma(self):
        oms = np.linspace(0.01, 0.5, 30)
        f_om = [stationary_fidelity(ToyParams(omega=o, delta=1.0, gamma=0.2)) for o in oms]
        assert np.all(np.diff(f_om) < 0)
        f_ga = [stationary_fidelity(ToyParams(omega=0.05, delta=1.0, gamma=g)) for g in oms]
        assert np.all(np.diff(f_ga) < 0)


class TestRates:
    def test_max_fidelity(self):
        assert max_fidelity(1.0, 0.0) == 1.0
        assert max_fidelity(1.0, 0.2) == pytest.approx(0.9901960784313726, abs=1e-15)
        with pytest.raises(DomainError):
            max_fidelity(0.0, 0.2)

    def test_heating_rate(self):
        assert heating_rate(ToyParams(omega=0.0, delta=1.0, gamma=0.2)) == 0.0
        assert heating_rate(REF) == pytest.approx(1.2376237623762376e-4, abs=1e-18)

    def test_cooling_rates(self):
        assert cooling_rate(REF) == pytest.approx(0.010532829598749347, abs=1e-15)
        assert cooling_rate_approx(REF) == pytest.approx(0.010526315789473684, abs=1e-15)
        assert cooling_rate(ToyParams(omega=0.0, delta=1.0, gamma=0.2)) == 0.0
        with pytest.raises(DegenerateModelError):
            cooling_rate(ToyParams(omega=0.0, delta=1.0, gamma=0.0))
        with pytest.raises(DegenerateModelError):
            cooling_rate_approx(ToyParams(omega=0.0, delta=1.0, gamma=0.0))

    def test_cooling_saturates_at_gamma_over_three(self):
        p = ToyParams(omega=500.0, delta=1.0, gamma=0.2)
        assert cooling_rate_approx(p) == pytest.approx(0.2 / 3, rel=1e-6)

    def test_detailed_balance_identity(self, rng):
        for p in random_params(rng, 40):
            f = stationary_fidelity(p)
            assert abs(heating_rate(p) * f - cooling_rate(p) * (1 - f)) < 1e-12


class TestTransient:
    def test_endpoints(self):
        assert transient_population(0.01, 1e-4, 0.0) == 0.0
        assert transient_population(0.01, 1e-4, 1e9) == pytest.approx(0.01 / 0.0101, abs=1e-12)

    def test_reference_value(self):
        assert transient_population(0.0105, 1.24e-4, 200.0) == pytest.approx(
            0.8702657190214127, abs=1e-15
        )

    def test_domain(self):
        with pytest.raises(DomainError):
            transient_population(0.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            transient_population(0.01, 0.0, -1.0)


class TestPulse:
    def test_schedule_values(self):
        sched = PulseSchedule.toy(0.05, 0.2)
        assert sched.gamma_c0 == pytest.approx(0.010526315789473684, abs=1e-15)
        assert sched.omega_at(0.0) == pytest.approx(3 * 0.05, abs=1e-15)
        assert pulse_omega(1.0 / sched.gamma_c0, sched) == pytest.approx(0.75 * 0.05, abs=1e-12)
        assert sched.omega_at(1e12) < 1e-15

    def test_monotone_decreasing(self):
        sched = PulseSchedule.toy(0.05, 0.2)
        t = np.linspace(0.0, 500.0, 200)
        assert np.all(np.diff(sched.omega_at(t)) < 0)

    def test_cavity_multiplier(self):
        sched = PulseSchedule(omega0=0.015, gamma_c0=1e-3, multiplier=6.0)
        assert sched.omega_at(0.0) == pytest.approx(0.09)

    def test_pulsed_run_beats_constant_drive_early_then_freezes(self):
        # the ramp front-loads the cooling and then decays faster than the true
        # cooling empties |1>; the endpoint freezes well above the constant-drive
        # plateau
        gamma, om0 = 0.2, 0.05
        sched = PulseSchedule.toy(om0, gamma)
        p = ToyParams(omega=om0, delta=1.0, gamma=gamma)
        pulsed = integrate(p, initial_state(1), t_end=600.0, omega_t=sched.omega_at)
        const = integrate(p, initial_state(1), t_end=600.0)
        i100 = int(round(100.0 / (pulsed.times[1] - pulsed.times[0])))
        assert 1 - pulsed.fidelity[i100] < 1 - const.fidelity[i100]
        assert 1 - pulsed.fidelity[-1] == pytest.approx(0.2494, abs=2e-3)


class TestFit:
    def test_recovers_known_exponential(self):
        t = np.linspace(0.0, 3000.0, 3001)
        fid = 1.0 - 0.9 * np.exp(-0.004 * t)
        assert fitted_decay_rate(t, fid, f_inf=0.99) == pytest.approx(0.004, rel=1e-9)

    def test_window_too_small(self):
        t = np.linspace(0.0, 1.0, 5)
        with pytest.raises(DomainError):
            fitted_decay_rate(t, np.full(5, 0.999), 0.999)
