"""Compare the numba kernels against the pure-numpy fallback.

Runs the same seeded workloads on both backends and reports steps/second:
a monitored-qubit ensemble under switching feedback (the dominant workload)
and the deterministic mean-evolution propagator.

    python benchmarks/benchmark_backends.py [--trajectories N] [--horizon T]
"""

import argparse
import time

import numpy as np

import smestab as sm
from smestab._backend import numba_available

SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def feedback_model():
    return sm.ControlModel(
        H_o=np.zeros((2, 2)), H_f=SIGMA_Y, L=(SIGMA_Z,), eta=1.0,
        decomp=sm.Decomposition(dims=(1, 1)),
    )


def bench_ensemble(backend, n_traj, horizon, dt):
    model = feedback_model()
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    ctrl = sm.SwitchingController(0.5)
    # warm-up compiles the kernels outside the timed region
    sm.run_ensemble(model, rho0, ctrl, n_traj=2, horizon=10 * dt, dt=dt,
                    base_seed=0, backend=backend)
    start = time.perf_counter()
    ens = sm.run_ensemble(model, rho0, ctrl, n_traj=n_traj, horizon=horizon,
                          dt=dt, base_seed=0, backend=backend)
    elapsed = time.perf_counter() - start
    steps = n_traj * int(round(horizon / dt))
    return elapsed, steps, ens.terminal_fidelity


def bench_me(backend, horizon, dt):
    model = feedback_model()
    rho0 = np.eye(2, dtype=complex) / 2
    sm.propagate_me(model, rho0, u=1.0, horizon=10 * dt, dt=dt, backend=backend)
    start = time.perf_counter()
    sm.propagate_me(model, rho0, u=1.0, horizon=horizon, dt=dt, backend=backend)
    elapsed = time.perf_counter() - start
    return elapsed, int(round(horizon / dt))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trajectories", type=int, default=200)
    parser.add_argument("--horizon", type=float, default=5.0)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--me-horizon", type=float, default=200.0)
    args = parser.parse_args()

    backends = ["numpy"]
    if numba_available():
        backends.insert(0, "numba")
    else:
        print("numba not importable; benchmarking the fallback only")

    results = {}
    print(f"ensemble: {args.trajectories} trajectories, horizon {args.horizon}, "
          f"dt {args.dt}")
    for backend in backends:
        elapsed, steps, fid = bench_ensemble(
            backend, args.trajectories, args.horizon, args.dt
        )
        results[backend] = elapsed
        print(f"  {backend:6s}: {elapsed:8.2f} s  "
              f"({steps / elapsed / 1e6:6.2f} M steps/s, terminal fidelity {fid:.3f})")
    if len(results) == 2:
        print(f"  speedup: {results['numpy'] / results['numba']:.0f}x")

    results = {}
    print(f"mean evolution: horizon {args.me_horizon}, dt {args.dt}")
    for backend in backends:
        elapsed, steps = bench_me(backend, args.me_horizon, args.dt)
        results[backend] = elapsed
        print(f"  {backend:6s}: {elapsed:8.2f} s  ({steps / elapsed / 1e3:6.0f} k steps/s)")
    if len(results) == 2:
        print(f"  speedup: {results['numpy'] / results['numba']:.0f}x")


if __name__ == "__main__":
    main()
