"""Lyapunov-style functionals, a subspace distance proxy, and the
end-to-end stabilization verdict."""

from dataclasses import dataclass

import numpy as np

from .core import as_matrix, frobenius, projector
from .errors import TargetNotInvariantableError
from .invariance import Stabilizability, openloop_stabilizable
from .sim import bootstrap_min_mean, run_ensemble
from .synthesis import design_procedure, synthesize_open_loop


def V1(rho, decomp):
    """Population outside the target part: tr(P_R rho), in [0, 1], zero iff
    the state is supported on the target."""
    p_r = np.eye(decomp.dim) - projector(decomp, 0)
    return float(np.trace(p_r @ as_matrix(rho)).real)


def V2(rho, rho_d):
    """Fidelity-gap functional 1 - tr(rho_d rho)^2; zero iff rho equals the
    pure target."""
    f = np.trace(as_matrix(rho_d) @ as_matrix(rho)).real
    return float(1.0 - f * f)


def set_distance_proxy(rho, decomp):
    """Frobenius norm of everything outside the target corner block; an
    upper proxy for the distance to the set of target-supported states,
    with the same zero set."""
    a = decomp.to_adapted(as_matrix(rho)).copy()
    s = decomp.dims[0]
    a[:s, :s] = 0.0
    return frobenius(a)


def chi_estimate(ensemble, n_boot=200, seed=0):
    """Minimum over the grid of the mean complement population, with a
    bootstrap standard error over trajectories."""
    return bootstrap_min_mean(ensemble.v1_paths, n_boot=n_boot, seed=seed)


@dataclass(frozen=True)
class StabilizationVerdict:
    classification: Stabilizability
    synthesis_applied: bool
    chi: float
    chi_se: float
    terminal_v1: float
    terminal_fidelity: float
    v1_threshold: float
    fidelity_threshold: float
    feedback_run: bool
    passed: bool


def stabilization_report(model, controller=None, rho0=None, horizon=1.0, dt=1e-3,
                         n_traj=100, base_seed=0, synthesize=False,
                         v1_threshold=0.05, fidelity_threshold=0.9, gain=1.0,
                         backend=None):
    """Classification -> optional synthesis -> Monte Carlo -> thresholds.

    Passing requires terminal mean complement population at most
    ``v1_threshold`` and, for feedback controllers, terminal mean fidelity
    at least ``fidelity_threshold``.  Deterministic given the seeds.
    """
    classification = openloop_stabilizable(model)
    work = model
    applied = False
    if synthesize:
        if classification is Stabilizability.STABILIZABLE:
            h_extra = synthesize_open_loop(model, gain=gain)
        elif classification is Stabilizability.NEEDS_FEEDBACK:
            h_extra = design_procedure(model, gain=gain).H_c
        else:
            raise TargetNotInvariantableError(
                "no Hamiltonian synthesis can make this target invariant"
            )
        work = model.with_extra_hamiltonian(h_extra)
        applied = True
    if rho0 is None:
        rho0 = np.eye(model.dim, dtype=np.complex128) / model.dim
    ens = run_ensemble(
        work, rho0, controller, n_traj=n_traj, horizon=horizon, dt=dt,
        base_seed=base_seed, backend=backend,
    )
    from .sim import _as_controller, _controller_kernel_spec

    spec = _controller_kernel_spec(_as_controller(controller))
    feedback_run = spec is not None and spec[0] in (1, 2)
    terminal_fid = ens.terminal_fidelity
    passed = ens.terminal_v1 <= v1_threshold
    if feedback_run:
        passed = passed and terminal_fid is not None and terminal_fid >= fidelity_threshold
    return StabilizationVerdict(
        classification=classification, synthesis_applied=applied,
        chi=ens.chi, chi_se=ens.chi_se, terminal_v1=ens.terminal_v1,
        terminal_fidelity=terminal_fid if terminal_fid is not None else float("nan"),
        v1_threshold=v1_threshold, fidelity_threshold=fidelity_threshold,
        feedback_run=feedback_run, passed=bool(passed),
    )
