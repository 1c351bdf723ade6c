"""Equivalence of the numba and numpy kernel backends.

The two backends implement the same update formulas; trajectories started
from the same seed must agree to roundoff over short horizons.
"""

import numpy as np
import pytest

import smestab as sm
from smestab._backend import default_backend, kernels, numba_available

from modelzoo import (
    EXCITED,
    PLUS,
    decay_model,
    dephasing_model,
    feedback_class_model,
    feedback_qubit,
)

pytestmark = pytest.mark.skipif(
    not numba_available(), reason="numba unavailable; nothing to compare"
)


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("SMESTAB_BACKEND", "numpy")
    assert default_backend() == "numpy"
    monkeypatch.setenv("SMESTAB_BACKEND", "numba")
    assert default_backend() == "numba"
    monkeypatch.setenv("SMESTAB_BACKEND", "auto")
    assert default_backend() == "numba"
    monkeypatch.setenv("SMESTAB_BACKEND", "nonsense")
    with pytest.raises(ValueError):
        default_backend()


def test_kernel_modules_distinct():
    assert kernels("numba") is not kernels("numpy")


@pytest.mark.parametrize("controller", [
    None,
    sm.ConstantController(0.7),
    sm.ContinuousController(),
    sm.SwitchingController(0.5),
])
def test_sme_trajectories_agree(controller):
    m = feedback_qubit()
    a = sm.simulate_sme(m, EXCITED, controller, horizon=0.5, dt=1e-3, seed=23,
                        backend="numba")
    b = sm.simulate_sme(m, EXCITED, controller, horizon=0.5, dt=1e-3, seed=23,
                        backend="numpy")
    assert np.max(np.abs(a.states - b.states)) <= 1e-10
    np.testing.assert_allclose(a.controls, b.controls, atol=1e-10)
    np.testing.assert_allclose(a.record, b.record, atol=1e-10)
    np.testing.assert_allclose(a.v1, b.v1, atol=1e-10)
    if a.regions is not None:
        np.testing.assert_array_equal(a.regions, b.regions)


def test_sme_matches_python_reference_loop():
    # the slow python loop (used for custom controllers) is a third
    # implementation; it must agree with both kernels
    from smestab.sim import NoisePath, _simulate_sme_python

    m = feedback_qubit()
    ctrl = sm.SwitchingController(0.5)
    noise = NoisePath.generate(300, 1e-3, seed=77)
    a = sm.simulate_sme(m, EXCITED, ctrl, horizon=0.3, dt=1e-3, noise=noise,
                        backend="numba")
    b = _simulate_sme_python(m, EXCITED.copy(), ctrl, noise, seed=77)
    assert np.max(np.abs(a.states - b.states)) <= 1e-10
    np.testing.assert_allclose(a.controls, b.controls, atol=1e-10)
    np.testing.assert_array_equal(a.regions, b.regions)


def test_higher_dimension_projection_path():
    rng = np.random.default_rng(6)
    m = feedback_class_model(rng, 4, kind="noise")
    rho0 = np.eye(4, dtype=complex) / 4
    a = sm.simulate_sme(m, rho0, sm.ConstantController(1.0), horizon=0.3,
                        dt=1e-3, seed=11, backend="numba")
    b = sm.simulate_sme(m, rho0, sm.ConstantController(1.0), horizon=0.3,
                        dt=1e-3, seed=11, backend="numpy")
    assert np.max(np.abs(a.states - b.states)) <= 1e-9


def test_me_propagation_agrees():
    m = decay_model()
    a = sm.propagate_me(m, PLUS, horizon=1.0, dt=1e-3, backend="numba")
    b = sm.propagate_me(m, PLUS, horizon=1.0, dt=1e-3, backend="numpy")
    assert np.max(np.abs(a.states - b.states)) <= 1e-12


def test_ensembles_agree():
    m = dephasing_model()
    ea = sm.run_ensemble(m, PLUS, None, n_traj=8, horizon=0.3, dt=1e-3,
                         base_seed=3, backend="numba")
    eb = sm.run_ensemble(m, PLUS, None, n_traj=8, horizon=0.3, dt=1e-3,
                         base_seed=3, backend="numpy")
    assert np.max(np.abs(ea.mean_state - eb.mean_state)) <= 1e-10
    np.testing.assert_allclose(ea.v1_paths, eb.v1_paths, atol=1e-10)
    assert ea.chi == pytest.approx(eb.chi, abs=1e-10)
