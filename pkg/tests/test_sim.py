import numpy as np
import pytest
from scipy.linalg import expm

import smestab as sm
from smestab.errors import DimensionError, IntegrationAbort

from modelzoo import (
    EXCITED,
    GROUND,
    PLUS,
    SIGMA_X,
    SIGMA_Z,
    decay_model,
    dephasing_model,
    qubit_decomp,
    structured_model,
)


def zero_model(eta=1.0):
    return sm.ControlModel(
        H_o=np.zeros((2, 2)), H_f=np.zeros((2, 2)), L=(np.zeros((2, 2)),),
        eta=eta, decomp=qubit_decomp(),
    )


class TestNoisePath:
    def test_reproducible_from_seed(self):
        a = sm.NoisePath.generate(100, 1e-3, seed=42)
        b = sm.NoisePath.generate(100, 1e-3, seed=42)
        np.testing.assert_array_equal(a.increments, b.increments)
        assert a.n_steps == 100

    def test_aux_stream(self):
        a = sm.NoisePath.generate(50, 1e-3, seed=1, with_aux=True)
        assert a.aux_increments.shape == (50,)
        assert not np.array_equal(a.increments, a.aux_increments)

    def test_wtilde_combination(self):
        rec = np.array([1.0, -2.0, 0.5])
        aux = np.array([0.5, 0.5, 0.5])
        out = sm.wtilde_increments(rec, aux, eta=0.36)
        np.testing.assert_allclose(out, 0.6 * rec + 0.8 * aux)
        np.testing.assert_array_equal(sm.wtilde_increments(rec, aux, 1.0), rec)

    def test_wtilde_shape_mismatch(self):
        with pytest.raises(DimensionError):
            sm.wtilde_increments(np.ones(3), np.ones(4), 0.5)


class TestSimulateSme:
    def test_zero_model_states_constant_record_is_noise(self):
        traj = sm.simulate_sme(zero_model(), PLUS, None, horizon=0.1, dt=1e-3, seed=3)
        for state in traj.states:
            np.testing.assert_allclose(state, PLUS, atol=1e-14)
        noise = sm.NoisePath.generate(100, 1e-3, seed=3)
        np.testing.assert_allclose(traj.increments, noise.increments, atol=1e-15)

    def test_measurement_eigenstate_is_fixed(self):
        m = dephasing_model()
        traj = sm.simulate_sme(m, GROUND, None, horizon=0.2, dt=1e-3, seed=5)
        for state in traj.states:
            np.testing.assert_allclose(state, GROUND, atol=1e-12)
        # record drift is sqrt(eta)/2 * tr((L+L^dag) rho) = 1 on the eigenstate
        noise = sm.NoisePath.generate(200, 1e-3, seed=5)
        np.testing.assert_allclose(
            traj.increments, 1.0 * 1e-3 + noise.increments, atol=1e-12
        )

    def test_states_valid_and_trace_defect_small(self, rng):
        m = decay_model()
        traj = sm.simulate_sme(m, PLUS, None, horizon=1.0, dt=1e-3, seed=9)
        assert traj.validate(1e-6)
        assert traj.max_trace_defect <= 10 * 1e-3**2

    def test_seed_determinism(self):
        m = dephasing_model(h_f=np.array([[0, -1j], [1j, 0]]))
        ctrl = sm.SwitchingController(0.5)
        a = sm.simulate_sme(m, EXCITED, ctrl, horizon=0.5, dt=1e-3, seed=17)
        b = sm.simulate_sme(m, EXCITED, ctrl, horizon=0.5, dt=1e-3, seed=17)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.record, b.record)
        np.testing.assert_array_equal(a.controls, b.controls)

    def test_custom_callable_controller(self):
        m = dephasing_model(h_f=np.array([[0, -1j], [1j, 0]]))
        traj = sm.simulate_sme(m, PLUS, lambda rho: 0.25, horizon=0.05, dt=1e-3, seed=1)
        np.testing.assert_allclose(traj.controls, 0.25)

    def test_collapse_martingale_and_fraction(self):
        # z measurement from the symmetric superposition: the target overlap
        # is a martingale, trajectories collapse to either eigenstate, and
        # the hitting fraction matches the initial overlap
        m = dephasing_model()
        ens = sm.run_ensemble(m, PLUS, None, n_traj=2000, horizon=10.0, dt=1e-3,
                              base_seed=13)
        frac = float(np.mean(ens.v1_paths[:, -1] < 0.01))
        assert abs(frac - 0.5) <= 0.03
        # mean fidelity conserved within 3 standard errors
        assert abs(ens.mean_fidelity[-1] - ens.mean_fidelity[0]) <= 3 * ens.sem_fidelity[-1]


class TestPropagateMe:
    def test_decay_closed_form(self):
        traj = sm.propagate_me(decay_model(), EXCITED, horizon=1.0, dt=1e-3)
        assert traj.states[-1, 1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-6)
        assert traj.states[-1, 0, 0].real == pytest.approx(1 - np.exp(-1.0), abs=1e-6)

    def test_dephasing_closed_form(self):
        traj = sm.propagate_me(dephasing_model(), PLUS, horizon=1.0, dt=1e-3)
        assert traj.states[-1, 0, 1].real == pytest.approx(0.5 * np.exp(-2.0), abs=1e-6)

    def test_unitary_purity_conserved(self):
        m = sm.ControlModel(
            H_o=SIGMA_Z, H_f=np.zeros((2, 2)), L=(), eta=1.0, decomp=qubit_decomp()
        )
        traj = sm.propagate_me(m, PLUS, horizon=2.0, dt=1e-3)
        purity = np.einsum("tij,tji->t", traj.states, traj.states).real
        np.testing.assert_allclose(purity, 1.0, atol=1e-9)


class TestZakai:
    def test_zero_model_constant(self):
        m = zero_model()
        rec = np.zeros(100)
        out = sm.simulate_zakai(m, PLUS, rec, dt=1e-3)
        np.testing.assert_allclose(out.raw_states[-1], PLUS, atol=1e-14)
        np.testing.assert_allclose(out.traces, 1.0, atol=1e-14)

    def test_paired_with_sme(self):
        m = dephasing_model(eta=0.5, kappa=0.15)
        traj = sm.simulate_sme(m, PLUS, None, horizon=1.0, dt=1e-4, seed=2)
        rec = sm.zakai_driving_record(m, traj)
        out = sm.simulate_zakai(m, PLUS, rec, dt=1e-4)
        gap = np.max(np.linalg.norm(out.states - traj.states, axis=(1, 2)))
        assert gap <= 5e-3
        assert np.all(out.traces > 0.0)

    def test_trace_positivity_abort(self):
        m = dephasing_model()
        hostile = np.full(1000, -10.0)  # huge negative record increments
        with pytest.raises(IntegrationAbort):
            sm.simulate_zakai(m, GROUND, hostile, dt=1e-3)


class TestSimulateVector:
    def test_unitary_flow(self):
        m = sm.ControlModel(
            H_o=SIGMA_Z, H_f=np.zeros((2, 2)), L=(), eta=1.0, decomp=qubit_decomp()
        )
        v0 = np.array([1.0, 1.0]) / np.sqrt(2)
        noise = sm.NoisePath.generate(1000, 1e-3, seed=0)
        path = sm.simulate_vector(m, v0, u=0.0, noise=noise, form="ito")
        # explicit Euler drifts off the unit sphere at O(dt) per unit time
        np.testing.assert_allclose(np.linalg.norm(path, axis=1), 1.0, atol=1e-3)
        expected = expm(-1j * SIGMA_Z * 1.0) @ v0
        np.testing.assert_allclose(path[-1], expected, atol=2e-3)

    def test_ito_vs_stratonovich_same_path(self):
        m = dephasing_model(kappa=0.15)
        v0 = np.array([1.0, 1.0], complex) / np.sqrt(2)
        noise = sm.NoisePath.generate(5000, 1e-4, seed=4)
        a = sm.simulate_vector(m, v0, u=0.0, noise=noise, form="ito")
        b = sm.simulate_vector(m, v0, u=0.0, noise=noise, form="stratonovich")
        assert np.max(np.linalg.norm(a - b, axis=1)) <= 5e-3

    def test_outer_product_matches_matrix_unraveling(self):
        m = dephasing_model(kappa=0.15)
        v0 = np.array([1.0, 1.0], complex) / np.sqrt(2)
        noise = sm.NoisePath.generate(5000, 1e-4, seed=4)
        path = sm.simulate_vector(m, v0, u=0.0, noise=noise, form="ito")
        outer = np.einsum("ti,tj->tij", path, path.conj())
        zk = sm.simulate_zakai(m, np.outer(v0, v0.conj()), noise.increments, dt=1e-4)
        assert np.max(np.linalg.norm(outer - zk.raw_states, axis=(1, 2))) <= 5e-3

    def test_bad_form_rejected(self):
        with pytest.raises(ValueError):
            sm.simulate_vector(
                dephasing_model(), np.array([1.0, 0.0]), 0.0,
                sm.NoisePath.generate(10, 1e-3, 0), form="heun",
            )


class TestSimulateDeterministic:
    def test_triangular_flow_stays_in_target(self):
        m = decay_model()
        v0 = np.array([1.0, 0.0], complex)
        times, path = sm.simulate_deterministic(m, v0, [(2.0, 1.0)], dt=1e-3)
        assert np.max(np.abs(path[:, 1])) <= 1e-12

    def test_block_diagonal_never_exits_complement(self):
        m = dephasing_model()
        v0 = np.array([0.0, 1.0], complex)
        _, path = sm.simulate_deterministic(m, v0, [(1.0, 1.0), (1.0, -0.5)], dt=1e-3)
        assert np.max(np.abs(path[:, 0])) <= 1e-12

    def test_coupled_input_escapes(self):
        m = sm.ControlModel(
            H_o=np.zeros((2, 2)), H_f=np.zeros((2, 2)), L=(SIGMA_X,), eta=1.0,
            decomp=qubit_decomp(),
        )
        v0 = np.array([0.0, 1.0], complex)
        _, path = sm.simulate_deterministic(m, v0, 1.0, dt=1e-3, horizon=1.0)
        assert np.max(np.abs(path[:, 0])) > 1e-6

    def test_scalar_control_needs_horizon(self):
        with pytest.raises(ValueError):
            sm.simulate_deterministic(decay_model(), np.array([1.0, 0.0]), 1.0)


class TestRunEnsemble:
    def test_requires_trajectories(self):
        with pytest.raises(ValueError):
            sm.run_ensemble(decay_model(), EXCITED, None, n_traj=0, horizon=0.1)

    def test_mean_consistency_short(self):
        m = decay_model()
        ens = sm.run_ensemble(m, EXCITED, None, n_traj=400, horizon=0.5, dt=1e-3,
                              base_seed=31)
        me = sm.propagate_me(m, EXCITED, horizon=0.5, dt=1e-3)
        gap = np.linalg.norm(ens.mean_state[-1] - me.states[-1])
        assert gap <= 3 * np.sqrt(np.sum(ens.sem_state[-1] ** 2))

    def test_mean_state_is_valid(self):
        m = dephasing_model()
        ens = sm.run_ensemble(m, PLUS, None, n_traj=100, horizon=0.3, dt=1e-3,
                              base_seed=7)
        assert sm.validate_state(ens.mean_state[-1], tol=1e-9).passed

    def test_invariant_complement_gives_unit_chi(self):
        m = structured_model(np.random.default_rng(3), 3, s=1, invariant=True)
        rho0 = np.zeros((3, 3), complex)
        rho0[1, 1] = rho0[2, 2] = 0.5
        # block-diagonal variant: strip the planted coupling row
        h = np.array(m.H_o)
        h[:1, 1:] = 0
        h[1:, :1] = 0
        ls = []
        for l in m.L:
            l = np.array(l)
            l[:1, 1:] = 0
            ls.append(l)
        bd = sm.ControlModel(H_o=h, H_f=m.H_f, L=tuple(ls), eta=1.0, decomp=m.decomp)
        ens = sm.run_ensemble(bd, rho0, None, n_traj=50, horizon=1.0, dt=1e-3,
                              base_seed=2)
        assert ens.chi == 1.0
        assert ens.chi_se == 0.0

    def test_ensemble_matches_single_trajectories(self):
        m = decay_model()
        ens = sm.run_ensemble(m, EXCITED, None, n_traj=3, horizon=0.2, dt=1e-3,
                              base_seed=50, stats_stride=1)
        for i in range(3):
            traj = sm.simulate_sme(m, EXCITED, None, horizon=0.2, dt=1e-3,
                                   seed=50 + i)
            np.testing.assert_allclose(ens.v1_paths[i], traj.v1, atol=1e-12)


def test_noise_path_length_mismatch_rejected():
    m = decay_model()
    bad = sm.NoisePath.generate(50, 1e-3, seed=0)
    with pytest.raises(DimensionError):
        sm.simulate_sme(m, EXCITED, None, horizon=0.1, dt=1e-3, noise=bad)
