"""Trajectory and ensemble integration.

Entry points:

* ``simulate_sme``     Euler-Maruyama on the conditioned-state diffusion,
                       with the homodyne record and per-step physicality
                       projection.
* ``propagate_me``     RK4 on the deterministic mean evolution.
* ``simulate_zakai``   the linear, unnormalized diffusion driven by a
                       measurement record, plus its normalization.
* ``simulate_vector``  the linear vector unravelings (Ito / Stratonovich).
* ``simulate_deterministic``  the piecewise-constant-control companion flow.
* ``run_ensemble``     Monte Carlo over independent records.

The SME and mean-evolution loops are dispatched to the numba or numpy
kernel backend; the remaining single-path integrators are plain numpy.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .control import (
    REGION_CODE_NA,
    ConstantController,
    ContinuousController,
    SwitchingController,
    SwitchingState,
)
from .core import as_matrix, dagger, project_to_physical, projector, validate_state
from .errors import DimensionError, IntegrationAbort
from .superop import (
    deterministic_drift_matrix,
    ito_drift_matrix,
    stratonovich_drift_matrix,
)


def _n_steps(horizon, dt):
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(round(horizon / dt))
    if n < 1:
        raise ValueError(f"horizon {horizon} shorter than one step dt={dt}")
    return n


def _kept_steps(n, stride):
    idx = np.arange(0, n + 1, stride, dtype=np.int64)
    if idx[-1] != n:
        idx = np.append(idx, n)
    return idx


@dataclass(frozen=True)
class NoisePath:
    """Pre-drawn Wiener increments for one trajectory.

    ``increments`` are N(0, dt) samples; the optional auxiliary stream is
    used to build record-driven noise for the vector unravelings when the
    measurement is inefficient.
    """

    dt: float
    increments: np.ndarray
    seed: int = None
    aux_increments: np.ndarray = None

    def __post_init__(self):
        inc = np.array(self.increments, dtype=np.float64)
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)
        if self.aux_increments is not None:
            aux = np.array(self.aux_increments, dtype=np.float64)
            if aux.shape != inc.shape:
                raise DimensionError("auxiliary increments must match the main stream")
            aux.flags.writeable = False
            object.__setattr__(self, "aux_increments", aux)

    @classmethod
    def generate(cls, n_steps, dt, seed, with_aux=False):
        rng = np.random.default_rng(seed)
        scale = np.sqrt(dt)
        inc = rng.standard_normal(n_steps) * scale
        aux = rng.standard_normal(n_steps) * scale if with_aux else None
        return cls(dt=dt, increments=inc, seed=seed, aux_increments=aux)

    @property
    def n_steps(self):
        return self.increments.shape[0]


def wtilde_increments(record, aux, eta):
    """Combine a measurement record with an independent auxiliary stream:
    sqrt(eta) * dy + sqrt(1 - eta) * dW'."""
    record = np.asarray(record, dtype=np.float64)
    aux = np.asarray(aux, dtype=np.float64)
    if record.shape != aux.shape:
        raise DimensionError("record and auxiliary stream lengths differ")
    return np.sqrt(eta) * record + np.sqrt(1.0 - eta) * aux


def zakai_driving_record(model, trajectory):
    """Re-express a trajectory's record in the normalization expected by the
    linear unnormalized diffusion.

    The emitted record carries drift sqrt(eta)/2 * tr((L_0 + L_0^dag) rho) dt,
    while normalizing the linear diffusion reproduces the conditioned state
    only when its driving record carries twice that drift.  This helper adds
    the missing half, computed from the trajectory's own states:
    dy' = dy + sqrt(eta)/2 * tr((L_0 + L_0^dag) rho_t) dt.
    """
    l0 = model.L0
    trs = np.einsum("ij,tji->t", l0 + dagger(l0), trajectory.states).real
    dt = trajectory.dt
    return trajectory.increments + np.sqrt(model.eta) * 0.5 * trs[:-1] * dt


@dataclass(frozen=True)
class Trajectory:
    """One integrated path on the full time grid.

    ``controls[i]`` is the control evaluated at ``states[i]`` (the final
    entry is evaluated but drives no step).  ``record[i]`` is the measurement
    increment over the step ending at ``times[i]`` (``record[0]`` is 0); the
    raw increment sequence is available as ``increments``.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    record: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    fidelity: np.ndarray
    regions: np.ndarray
    max_trace_defect: float
    seed: int = None

    @property
    def increments(self):
        return None if self.record is None else self.record[1:]

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def validate(self, tol=1e-6):
        """Check every stored state against the density-matrix invariants."""
        for i in range(self.states.shape[0]):
            report = validate_state(self.states[i], tol)
            if not report.passed:
                raise ValueError(f"state at step {i} invalid: {report.violations}")
        return True


def _model_arrays(model, u=None):
    d = model.dim
    ls = (
        np.ascontiguousarray(np.stack(model.L))
        if model.L
        else np.zeros((0, d, d), dtype=np.complex128)
    )
    ldl = np.zeros((d, d), dtype=np.complex128)
    for lk in model.L:
        ldl += dagger(lk) @ lk
    l0 = np.ascontiguousarray(model.L0)
    return ls, ldl, l0


def _as_controller(controller):
    if controller is None:
        return ConstantController(0.0)
    if isinstance(controller, (int, float)):
        return ConstantController(float(controller))
    return controller


def _controller_kernel_spec(controller):
    """(kind, param) for kernel-eligible controllers, else None."""
    if isinstance(controller, ConstantController):
        return 0, controller.value
    if isinstance(controller, ContinuousController):
        return 1, 0.0
    if isinstance(controller, SwitchingController):
        return 2, controller.gamma
    return None


def simulate_sme(model, rho0, controller=None, horizon=1.0, dt=1e-3, seed=0,
                 noise=None, backend=None):
    """Integrate the conditioned-state equation for one record realization.

    The control is evaluated on the current state before each step; the
    state is projected back to the physical set after each step.  Raises
    IntegrationAbort if the state degenerates.
    """
    rho0 = as_matrix(rho0)
    report = validate_state(rho0, tol=1e-6)
    if not report.passed:
        raise ValueError(f"initial state invalid: {report.violations}")
    n = _n_steps(horizon, dt)
    if noise is None:
        noise = NoisePath.generate(n, dt, seed)
    if noise.n_steps != n:
        raise DimensionError(f"noise path has {noise.n_steps} steps, expected {n}")
    controller = _as_controller(controller)
    spec = _controller_kernel_spec(controller)
    d = model.dim
    if rho0.shape[0] != d:
        raise DimensionError(f"initial state dim {rho0.shape[0]} != model dim {d}")
    if spec is None:
        return _simulate_sme_python(model, rho0, controller, noise, seed)
    kind, param = spec
    has_rd = model.rho_d is not None
    if kind in (1, 2) and not has_rd:
        raise ValueError("state-feedback controllers need a target state in the model")
    kern = _backend.kernels(backend)
    ls, ldl, l0 = _model_arrays(model)
    rho_d = (
        np.ascontiguousarray(model.rho_d)
        if has_rd
        else np.zeros((d, d), dtype=np.complex128)
    )
    p_s = np.ascontiguousarray(projector(model.decomp, 0))
    nk = n + 1
    states = np.empty((nk, d, d), dtype=np.complex128)
    v1 = np.empty(nk)
    v2 = np.empty(nk)
    fid = np.empty(nk)
    u_out = np.empty(nk)
    dy_out = np.empty(nk)
    region_out = np.empty(nk, dtype=np.int64)
    status, bad_step, terr = kern.sme_core(
        np.ascontiguousarray(model.H_o), np.ascontiguousarray(model.H_f), l0, ls,
        ldl, float(model.eta), np.ascontiguousarray(rho0), float(dt),
        noise.increments, int(kind), float(param), rho_d, int(has_rd), p_s, 1,
        states, v1, v2, fid, u_out, dy_out, region_out,
    )
    if status != 0:
        raise IntegrationAbort("state degenerated during integration", int(bad_step))
    times = np.arange(n + 1) * dt
    if not has_rd:
        v2 = None
        fid = None
    regions = region_out if kind == 2 else None
    return Trajectory(
        times=times, states=states, controls=u_out, record=dy_out, v1=v1, v2=v2,
        fidelity=fid, regions=regions, max_trace_defect=float(terr), seed=seed,
    )


def _simulate_sme_python(model, rho0, controller, noise, seed):
    """Reference loop for arbitrary controller objects (slow path).

    The controller must expose ``start()`` and
    ``__call__(rho, memory, rho_d, h_f) -> (u, memory)``; a bare callable
    ``f(rho) -> u`` is adapted on the fly.
    """
    from .superop import sme_diffusion, sme_drift

    if not hasattr(controller, "start"):
        func = controller

        class _Adapter:
            def start(self):
                return None

            def __call__(self, rho, memory, rho_d, h_f):
                return float(func(rho)), None

        controller = _Adapter()
    n = noise.n_steps
    dt = noise.dt
    d = model.dim
    p_s = projector(model.decomp, 0)
    rho_d = model.rho_d
    states = np.empty((n + 1, d, d), dtype=np.complex128)
    v1 = np.empty(n + 1)
    v2 = np.empty(n + 1)
    fid = np.empty(n + 1)
    u_out = np.empty(n + 1)
    dy_out = np.zeros(n + 1)
    region_out = np.full(n + 1, REGION_CODE_NA, dtype=np.int64)
    rho = rho0.copy()
    memory = controller.start()
    max_terr = 0.0
    sq = np.sqrt(model.eta)
    l0 = model.L0
    for it in range(n + 1):
        u, memory = controller(rho, memory, rho_d, model.H_f)
        states[it] = rho
        v1[it] = 1.0 - np.trace(p_s @ rho).real
        if rho_d is not None:
            f = np.trace(rho_d @ rho).real
            fid[it] = f
            v2[it] = 1.0 - f * f
        else:
            fid[it] = np.nan
            v2[it] = np.nan
        u_out[it] = u
        if isinstance(memory, SwitchingState):
            region_out[it] = memory.code
        if it == n:
            break
        drift = sme_drift(model, rho, u)
        g = sme_diffusion(model, rho)
        dw = noise.increments[it]
        dy_out[it + 1] = sq * 0.5 * np.trace((l0 + dagger(l0)) @ rho).real * dt + dw
        rho = rho + drift * dt + g * dw
        terr = abs(np.trace(rho) - 1.0)
        max_terr = max(max_terr, terr)
        try:
            rho = project_to_physical(rho)
        except Exception as exc:
            raise IntegrationAbort(str(exc), it) from exc
    times = np.arange(n + 1) * dt
    has_rd = rho_d is not None
    has_region = np.any(region_out != REGION_CODE_NA)
    return Trajectory(
        times=times, states=states, controls=u_out, record=dy_out, v1=v1,
        v2=v2 if has_rd else None, fidelity=fid if has_rd else None,
        regions=region_out if has_region else None,
        max_trace_defect=float(max_terr), seed=seed,
    )


def propagate_me(model, rho0, u=0.0, horizon=1.0, dt=1e-3, backend=None):
    """RK4 integration of the deterministic mean evolution at constant control."""
    rho0 = as_matrix(rho0)
    n = _n_steps(horizon, dt)
    kern = _backend.kernels(backend)
    ls, ldl, _ = _model_arrays(model)
    d = model.dim
    states = np.empty((n + 1, d, d), dtype=np.complex128)
    h = np.ascontiguousarray(model.hamiltonian(u))
    kern.me_core(h, ls, ldl, np.ascontiguousarray(rho0), float(dt), n, 1, states)
    times = np.arange(n + 1) * dt
    p_s = projector(model.decomp, 0)
    v1 = 1.0 - np.einsum("ij,tji->t", p_s, states).real
    if model.rho_d is not None:
        fid = np.einsum("ij,tji->t", model.rho_d, states).real.copy()
        v2 = 1.0 - fid * fid
    else:
        fid = None
        v2 = None
    return Trajectory(
        times=times, states=states, controls=np.full(n + 1, float(u)), record=None,
        v1=v1, v2=v2, fidelity=fid, regions=None, max_trace_defect=0.0,
    )


@dataclass(frozen=True)
class ZakaiResult:
    """Linear-diffusion output: the unnormalized states, their traces, and
    the normalized states."""

    times: np.ndarray
    raw_states: np.ndarray
    traces: np.ndarray
    states: np.ndarray


def simulate_zakai(model, rho0, record, dt, u=0.0):
    """Integrate the linear unnormalized diffusion driven by the record
    increments ``record``; trace positivity is required at every step.

    ``u`` may be a scalar or a per-step array (e.g. a paired trajectory's
    control path).
    """
    rho0 = as_matrix(rho0)
    record = np.asarray(record, dtype=np.float64)
    n = record.shape[0]
    u_arr = np.broadcast_to(np.asarray(u, dtype=np.float64), (n,)) if np.ndim(u) == 0 \
        else np.asarray(u, dtype=np.float64)
    if u_arr.shape[0] < n:
        raise DimensionError(f"control path has {u_arr.shape[0]} entries, need {n}")
    d = model.dim
    ls = list(model.L)
    ldls = [dagger(lk) @ lk for lk in ls]
    l0 = model.L0
    sq = np.sqrt(model.eta)
    raw = np.empty((n + 1, d, d), dtype=np.complex128)
    traces = np.empty(n + 1)
    rho = rho0.copy()
    raw[0] = rho
    traces[0] = np.trace(rho).real
    for it in range(n):
        h = model.hamiltonian(u_arr[it])
        drift = -1j * (h @ rho - rho @ h)
        for lk, ldl in zip(ls, ldls):
            drift += lk @ rho @ dagger(lk) - 0.5 * (ldl @ rho + rho @ ldl)
        stoch = sq * (l0 @ rho + rho @ dagger(l0))
        rho = rho + drift * dt + stoch * record[it]
        tr = np.trace(rho).real
        if tr <= 0.0:
            raise IntegrationAbort("unnormalized state lost trace positivity", it)
        raw[it + 1] = rho
        traces[it + 1] = tr
    times = np.arange(n + 1) * dt
    states = raw / traces[:, None, None]
    return ZakaiResult(times=times, raw_states=raw, traces=traces, states=states)


def simulate_vector(model, v0, u=0.0, noise=None, form="ito"):
    """Integrate the linear vector unraveling along a noise path.

    ``form="ito"`` uses Euler-Maruyama with the Ito drift matrix;
    ``form="stratonovich"`` uses the Heun predictor-corrector scheme with
    the conversion-corrected drift.  Returns the (n+1, dim) path.
    """
    if noise is None:
        raise ValueError("simulate_vector requires an explicit noise path")
    v = np.asarray(v0, dtype=np.complex128).ravel().copy()
    if v.shape[0] != model.dim:
        raise DimensionError(f"vector dim {v.shape[0]} != model dim {model.dim}")
    n = noise.n_steps
    dt = noise.dt
    dw = noise.increments
    l0 = model.L0
    path = np.empty((n + 1, model.dim), dtype=np.complex128)
    path[0] = v
    if form == "ito":
        a = ito_drift_matrix(model, u)
        for it in range(n):
            v = v + (a @ v) * dt + (l0 @ v) * dw[it]
            path[it + 1] = v
    elif form == "stratonovich":
        a = stratonovich_drift_matrix(model, u)
        for it in range(n):
            av = a @ v
            lv = l0 @ v
            pred = v + av * dt + lv * dw[it]
            v = v + 0.5 * dt * (av + a @ pred) + 0.5 * dw[it] * (lv + l0 @ pred)
            path[it + 1] = v
    else:
        raise ValueError(f"form must be 'ito' or 'stratonovich', got {form!r}")
    return path


def simulate_deterministic(model, v0, u_pieces, dt=1e-3, horizon=None):
    """RK4 on the companion flow dv/dt = A v + u(t) L_0 v with
    piecewise-constant control.

    ``u_pieces`` is a sequence of (duration, value) pairs, or a scalar
    together with ``horizon``.  Returns (times, path).
    """
    v = np.asarray(v0, dtype=np.complex128).ravel().copy()
    if np.ndim(u_pieces) == 0:
        if horizon is None:
            raise ValueError("scalar control needs an explicit horizon")
        u_pieces = [(float(horizon), float(u_pieces))]
    a = deterministic_drift_matrix(model)
    b = model.L0
    times = [0.0]
    path = [v.copy()]
    t = 0.0
    for duration, value in u_pieces:
        m = a + value * b
        steps = max(1, int(round(duration / dt)))
        h = duration / steps
        for _ in range(steps):
            k1 = m @ v
            k2 = m @ (v + 0.5 * h * k1)
            k3 = m @ (v + 0.5 * h * k2)
            k4 = m @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            times.append(t)
            path.append(v.copy())
    return np.asarray(times), np.asarray(path)


@dataclass(frozen=True)
class EnsembleStats:
    """Monte Carlo aggregates over independent trajectories.

    Scalars diagnostics carry per-time standard errors of the mean; ``chi``
    is the minimum over the grid of the mean complement population, with a
    bootstrap standard error.
    """

    sample_count: int
    times: np.ndarray
    kept_steps: np.ndarray
    mean_state: np.ndarray
    sem_state: np.ndarray
    mean_v1: np.ndarray
    sem_v1: np.ndarray
    mean_v2: np.ndarray
    sem_v2: np.ndarray
    mean_fidelity: np.ndarray
    sem_fidelity: np.ndarray
    v1_paths: np.ndarray
    chi: float
    chi_se: float
    max_trace_defect: float
    base_seed: int

    @property
    def terminal_v1(self):
        return float(self.mean_v1[-1])

    @property
    def terminal_fidelity(self):
        return None if self.mean_fidelity is None else float(self.mean_fidelity[-1])


def bootstrap_min_mean(paths, n_boot=200, seed=0):
    """Minimum over the grid of the across-trajectory mean, with a bootstrap
    standard error from resampling trajectories."""
    paths = np.asarray(paths)
    point = float(paths.mean(axis=0).min())
    rng = np.random.default_rng(seed)
    n = paths.shape[0]
    boot = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        boot[b] = paths[idx].mean(axis=0).min()
    return point, float(boot.std(ddof=1))


def _mean_sem(total, total_sq, n):
    mean = total / n
    var = np.maximum(total_sq / n - np.abs(mean) ** 2, 0.0)
    if n > 1:
        var = var * (n / (n - 1))
    return mean, np.sqrt(var / n)


def run_ensemble(model, rho0, controller=None, n_traj=100, horizon=1.0, dt=1e-3,
                 base_seed=0, stats_stride=None, backend=None, chunk_size=256,
                 n_boot=200):
    """Run ``n_traj`` independent trajectories with seeds
    base_seed..base_seed+n_traj-1 and aggregate the diagnostics.

    Statistics are collected on a subsampled grid (``stats_stride`` steps,
    chosen automatically to keep about 500 points).
    """
    if n_traj <= 0:
        raise ValueError("ensemble needs at least one trajectory")
    rho0 = as_matrix(rho0)
    n = _n_steps(horizon, dt)
    stride = stats_stride or max(1, n // 500)
    kept = _kept_steps(n, stride)
    nk = kept.shape[0]
    controller = _as_controller(controller)
    spec = _controller_kernel_spec(controller)
    if spec is None:
        raise ValueError("run_ensemble supports the built-in controller types")
    kind, param = spec
    has_rd = model.rho_d is not None
    if kind in (1, 2) and not has_rd:
        raise ValueError("state-feedback controllers need a target state in the model")
    kern = _backend.kernels(backend)
    d = model.dim
    ls, ldl, l0 = _model_arrays(model)
    rho_d = (
        np.ascontiguousarray(model.rho_d)
        if has_rd
        else np.zeros((d, d), dtype=np.complex128)
    )
    p_s = np.ascontiguousarray(projector(model.decomp, 0))
    h_o = np.ascontiguousarray(model.H_o)
    h_f = np.ascontiguousarray(model.H_f)
    rho0c = np.ascontiguousarray(rho0)
    sum_states = np.zeros((nk, d, d), dtype=np.complex128)
    sum_abs2 = np.zeros((nk, d, d))
    sums = {name: np.zeros(nk) for name in ("v1", "v1sq", "v2", "v2sq", "f", "fsq")}
    v1_paths = np.empty((n_traj, nk))
    max_terr = 0.0
    scale = np.sqrt(dt)
    start = 0
    while start < n_traj:
        nt = min(chunk_size, n_traj - start)
        dws = np.empty((nt, n))
        for i in range(nt):
            rng = np.random.default_rng(base_seed + start + i)
            dws[i] = rng.standard_normal(n) * scale
        states = np.empty((nt, nk, d, d), dtype=np.complex128)
        v1 = np.empty((nt, nk))
        v2 = np.empty((nt, nk))
        fid = np.empty((nt, nk))
        u_out = np.empty((nt, nk))
        dy_out = np.empty((nt, nk))
        region_out = np.empty((nt, nk), dtype=np.int64)
        status = np.empty(nt, dtype=np.int64)
        bad = np.empty(nt, dtype=np.int64)
        terr = np.empty(nt)
        kern.sme_chunk(
            h_o, h_f, l0, ls, ldl, float(model.eta), rho0c, float(dt), dws,
            int(kind), float(param), rho_d, int(has_rd), p_s, int(stride),
            states, v1, v2, fid, u_out, dy_out, region_out, status, bad, terr,
        )
        if np.any(status != 0):
            i = int(np.argmax(status != 0))
            raise IntegrationAbort(
                f"trajectory {start + i} (seed {base_seed + start + i}) degenerated",
                int(bad[i]),
            )
        sum_states += states.sum(axis=0)
        sum_abs2 += (states.real ** 2 + states.imag ** 2).sum(axis=0)
        sums["v1"] += v1.sum(axis=0)
        sums["v1sq"] += (v1 ** 2).sum(axis=0)
        if has_rd:
            sums["v2"] += v2.sum(axis=0)
            sums["v2sq"] += (v2 ** 2).sum(axis=0)
            sums["f"] += fid.sum(axis=0)
            sums["fsq"] += (fid ** 2).sum(axis=0)
        v1_paths[start:start + nt] = v1
        max_terr = max(max_terr, float(terr.max()))
        start += nt
    mean_state, sem_state = _mean_sem(sum_states, sum_abs2, n_traj)
    mean_v1, sem_v1 = _mean_sem(sums["v1"], sums["v1sq"], n_traj)
    if has_rd:
        mean_v2, sem_v2 = _mean_sem(sums["v2"], sums["v2sq"], n_traj)
        mean_f, sem_f = _mean_sem(sums["f"], sums["fsq"], n_traj)
    else:
        mean_v2 = sem_v2 = mean_f = sem_f = None
    chi, chi_se = bootstrap_min_mean(v1_paths, n_boot=n_boot, seed=base_seed)
    return EnsembleStats(
        sample_count=n_traj, times=kept * dt, kept_steps=kept,
        mean_state=mean_state, sem_state=sem_state,
        mean_v1=mean_v1, sem_v1=sem_v1, mean_v2=mean_v2, sem_v2=sem_v2,
        mean_fidelity=mean_f, sem_fidelity=sem_f, v1_paths=v1_paths,
        chi=chi, chi_se=chi_se, max_trace_defect=max_terr, base_seed=base_seed,
    )
