"""Command-line front end.

Subcommands: analyze, synthesize, simulate, ensemble, report.  Experiments
are described by a JSON document; complex matrices are nested arrays of
[re, im] pairs.  Exit codes: 0 success, 2 configuration or model-structure
error, 3 numerical abort, 4 verdict failure.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import default_backend
from .control import (
    REGION_LABELS,
    ConstantController,
    ContinuousController,
    SwitchingController,
)
from .core import Decomposition, validate_state
from .diagnostics import stabilization_report
from .errors import (
    ConfigError,
    IntegrationAbort,
    NotStabilizableError,
    SmestabError,
)
from .invariance import Stabilizability, check_invariant, openloop_stabilizable, \
    stationary_support
from .sim import run_ensemble, simulate_sme
from .superop import ControlModel
from .synthesis import design_procedure, synthesize_open_loop, verify_synthesis

SCHEMA_VERSION = 1


def matrix_to_json(m):
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def matrix_from_json(obj, where):
    try:
        rows = [[complex(float(e[0]), float(e[1])) for e in row] for row in obj]
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"{where}: matrices are nested arrays of [re, im] pairs") from exc
    m = np.array(rows, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{where}: matrix must be square, got shape {m.shape}")
    return m


@dataclass
class ExperimentConfig:
    model: ControlModel
    controller_type: str
    controller_value: float
    gamma: float
    horizon: float
    dt: float
    trajectories: int
    seed: int
    check_invariance: bool
    synthesize: bool
    verify: bool
    gain: float
    v1_threshold: float
    fidelity_threshold: float
    output_dir: str

    def controller(self):
        if self.controller_type == "constant":
            return ConstantController(self.controller_value)
        if self.controller_type == "continuous":
            return ContinuousController()
        return SwitchingController(self.gamma)

    def to_dict(self):
        model = {
            "dim": self.model.dim,
            "H_o": matrix_to_json(self.model.H_o),
            "H_f": matrix_to_json(self.model.H_f),
            "L": [matrix_to_json(l) for l in self.model.L],
            "eta": self.model.eta,
            "decomposition": {
                "dims": list(self.model.decomp.dims),
                "basis": None
                if self.model.decomp.basis is None
                else matrix_to_json(self.model.decomp.basis),
            },
            "target_state": None
            if self.model.rho_d is None
            else matrix_to_json(self.model.rho_d),
        }
        return {
            "model": model,
            "controller": {
                "type": self.controller_type,
                "value": self.controller_value,
                "gamma": self.gamma,
            },
            "run": {
                "horizon": self.horizon,
                "dt": self.dt,
                "trajectories": self.trajectories,
                "seed": self.seed,
            },
            "analysis": {
                "check_invariance": self.check_invariance,
                "synthesize": self.synthesize,
                "verify": self.verify,
                "gain": self.gain,
            },
            "report": {
                "v1_threshold": self.v1_threshold,
                "fidelity_threshold": self.fidelity_threshold,
            },
            "output": {"dir": self.output_dir},
        }


def _get(section, key, default=None, required=False, where=""):
    if key not in section:
        if required:
            raise ConfigError(f"missing required field {where}.{key}")
        return default
    return section[key]


def parse_config(doc):
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    msec = _get(doc, "model", required=True, where="$")
    h_o = matrix_from_json(_get(msec, "H_o", required=True, where="model"), "model.H_o")
    h_f_raw = _get(msec, "H_f")
    h_f = (
        matrix_from_json(h_f_raw, "model.H_f")
        if h_f_raw is not None
        else np.zeros_like(h_o)
    )
    l_ops = [
        matrix_from_json(l, f"model.L[{i}]")
        for i, l in enumerate(_get(msec, "L", default=[]))
    ]
    eta = float(_get(msec, "eta", default=1.0))
    dsec = _get(msec, "decomposition", required=True, where="model")
    dims = _get(dsec, "dims", required=True, where="model.decomposition")
    basis_raw = _get(dsec, "basis")
    basis = (
        matrix_from_json(basis_raw, "model.decomposition.basis")
        if basis_raw is not None
        else None
    )
    try:
        decomp = Decomposition(dims=tuple(int(d) for d in dims), basis=basis)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model.decomposition: {exc}") from exc
    target_raw = _get(msec, "target_state")
    rho_d = (
        matrix_from_json(target_raw, "model.target_state")
        if target_raw is not None
        else None
    )
    if rho_d is not None and not validate_state(rho_d, tol=1e-8).passed:
        raise ConfigError("model.target_state is not a valid density matrix")
    declared_dim = _get(msec, "dim")
    if declared_dim is not None and int(declared_dim) != h_o.shape[0]:
        raise ConfigError(
            f"model.dim = {declared_dim} but H_o is {h_o.shape[0]}x{h_o.shape[1]}"
        )
    try:
        model = ControlModel(
            H_o=h_o, H_f=h_f, L=tuple(l_ops), eta=eta, decomp=decomp, rho_d=rho_d
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    csec = _get(doc, "controller", default={})
    ctype = _get(csec, "type", default="constant")
    if ctype not in ("constant", "continuous", "switching"):
        raise ConfigError(f"controller.type must be constant|continuous|switching, got {ctype!r}")
    gamma = float(_get(csec, "gamma", default=0.5))
    if ctype == "switching" and not 0.0 < gamma < 1.0:
        raise ConfigError(f"controller.gamma must lie in (0, 1), got {gamma}")
    rsec = _get(doc, "run", default={})
    asec = _get(doc, "analysis", default={})
    repsec = _get(doc, "report", default={})
    osec = _get(doc, "output", default={})
    dt = float(_get(rsec, "dt", default=1e-3))
    if dt <= 0:
        raise ConfigError(f"run.dt must be positive, got {dt}")
    traj = int(_get(rsec, "trajectories", default=1))
    if traj < 1:
        raise ConfigError(f"run.trajectories must be at least 1, got {traj}")
    return ExperimentConfig(
        model=model,
        controller_type=ctype,
        controller_value=float(_get(csec, "value", default=0.0)),
        gamma=gamma,
        horizon=float(_get(rsec, "horizon", default=1.0)),
        dt=dt,
        trajectories=traj,
        seed=int(_get(rsec, "seed", default=0)),
        check_invariance=bool(_get(asec, "check_invariance", default=True)),
        synthesize=bool(_get(asec, "synthesize", default=False)),
        verify=bool(_get(asec, "verify", default=False)),
        gain=float(_get(asec, "gain", default=1.0)),
        v1_threshold=float(_get(repsec, "v1_threshold", default=0.05)),
        fidelity_threshold=float(_get(repsec, "fidelity_threshold", default=0.9)),
        output_dir=str(_get(osec, "dir", default=".")),
    )


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x):
    return repr(float(x))


def write_trajectory_csv(path, traj, regions_enabled):
    d = traj.states.shape[1]
    cols = ["t", "u", "dy", "v1", "v2", "fidelity", "region"]
    for i in range(d):
        for j in range(d):
            cols.append(f"rho_{i}{j}_re")
            cols.append(f"rho_{i}{j}_im")
    lines = [",".join(cols)]
    n = traj.times.shape[0]
    for idx in range(n):
        row = [
            _fmt(traj.times[idx]),
            _fmt(traj.controls[idx]),
            _fmt(traj.record[idx]) if traj.record is not None else "nan",
            _fmt(traj.v1[idx]),
            _fmt(traj.v2[idx]) if traj.v2 is not None else "nan",
            _fmt(traj.fidelity[idx]) if traj.fidelity is not None else "nan",
            REGION_LABELS[int(traj.regions[idx])] if regions_enabled and traj.regions is not None else "",
        ]
        for i in range(d):
            for j in range(d):
                row.append(_fmt(traj.states[idx, i, j].real))
                row.append(_fmt(traj.states[idx, i, j].imag))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(out_dir, config, command, seeds, outputs):
    try:
        import numba

        numba_version = numba.__version__
    except ImportError:
        numba_version = None
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_sha256": hashlib.sha256(
            _canonical_json(config.to_dict()).encode()
        ).hexdigest(),
        "config": config.to_dict(),
        "seeds": list(seeds),
        "backend": default_backend(),
        "versions": {
            "smestab": __version__,
            "numpy": np.__version__,
            "numba": numba_version,
        },
        "outputs": sorted(outputs),
    }
    _write_json(out_dir / "manifest.json", manifest)


def _invariance_payload(report):
    return {
        "invariant": report.invariant,
        "threshold": report.threshold,
        "witnesses": [
            {"condition": c, "operator": k, "residual": r}
            for c, k, r in report.witnesses
        ],
    }


def _stationary_payload(report):
    return {
        "kernel_dimension": report.kernel_dimension,
        "has_R_supported_stationary_state": report.has_R_supported_stationary_state,
        "offending_state": None
        if report.offending_state is None
        else matrix_to_json(report.offending_state),
        "r_restricted_kernel_dimension": report.r_restricted_kernel_dimension,
        "conclusive": report.conclusive,
    }


def cmd_analyze(config, out_dir, quiet):
    model = config.model
    inv = check_invariant(model, u=0.0)
    classification = openloop_stabilizable(model)
    stat = stationary_support(model, u=0.0)
    payload = {
        "invariance": _invariance_payload(inv),
        "classification": classification.value,
        "stationary_support": _stationary_payload(stat),
    }
    _write_json(out_dir / "analysis.json", payload)
    if not quiet:
        print(f"invariant: {inv.invariant}")
        print(f"classification: {classification.value}")
        print(
            "complement-supported stationary state: "
            f"{stat.has_R_supported_stationary_state}"
        )
    write_manifest(out_dir, config, "analyze", [], ["analysis.json"])
    return 0


def cmd_synthesize(config, out_dir, quiet):
    model = config.model
    classification = openloop_stabilizable(model)
    trace_payload = None
    if classification is Stabilizability.STABILIZABLE:
        h_c = synthesize_open_loop(model, gain=config.gain)
        u_bar = 0.0
    elif classification is Stabilizability.NEEDS_FEEDBACK:
        trace = design_procedure(model, gain=config.gain)
        h_c = trace.H_c
        u_bar = 1.0
        trace_payload = [
            {
                "index": s.index,
                "branch": s.branch,
                "direction": [[float(x.real), float(x.imag)] for x in s.direction],
                "coupling": [float(s.coupling.real), float(s.coupling.imag)],
            }
            for s in trace.steps
        ]
    else:
        raise NotStabilizableError(classification)
    payload = {
        "classification": classification.value,
        "H_c": matrix_to_json(h_c),
        "u_bar": u_bar,
        "trace": trace_payload,
    }
    if config.verify:
        ver = verify_synthesis(model, h_c, u_bar=u_bar)
        payload["verified"] = ver.verified
        payload["verification"] = {
            "invariance": _invariance_payload(ver.invariance),
            "stationary_support": _stationary_payload(ver.stationary),
        }
    _write_json(out_dir / "synthesis.json", payload)
    if not quiet:
        print(f"classification: {classification.value}")
        print(f"correction norm: {np.linalg.norm(h_c):.6g}")
        if "verified" in payload:
            print(f"verified: {payload['verified']}")
    write_manifest(out_dir, config, "synthesize", [], ["synthesis.json"])
    return 0


def _working_model(config):
    model = config.model
    if not config.synthesize:
        return model
    classification = openloop_stabilizable(model)
    if classification is Stabilizability.STABILIZABLE:
        return model.with_extra_hamiltonian(synthesize_open_loop(model, gain=config.gain))
    if classification is Stabilizability.NEEDS_FEEDBACK:
        return model.with_extra_hamiltonian(design_procedure(model, gain=config.gain).H_c)
    raise NotStabilizableError(classification)


def _initial_state(model):
    return np.eye(model.dim, dtype=np.complex128) / model.dim


def cmd_simulate(config, out_dir, quiet):
    model = _working_model(config)
    controller = config.controller()
    rho0 = _initial_state(model)
    outputs = []
    seeds = []
    for i in range(config.trajectories):
        seed = config.seed + i
        traj = simulate_sme(
            model, rho0, controller, horizon=config.horizon, dt=config.dt, seed=seed
        )
        name = f"trajectory_{i:04d}.csv"
        write_trajectory_csv(out_dir / name, traj, config.controller_type == "switching")
        outputs.append(name)
        seeds.append(seed)
        if not quiet:
            print(f"{name}: terminal v1 {traj.v1[-1]:.6g}")
    write_manifest(out_dir, config, "simulate", seeds, outputs)
    return 0


def _ensemble_payload(ens):
    return {
        "sample_count": ens.sample_count,
        "times": [float(t) for t in ens.times],
        "chi": ens.chi,
        "chi_se": ens.chi_se,
        "terminal_v1": ens.terminal_v1,
        "terminal_fidelity": ens.terminal_fidelity,
        "max_trace_defect": ens.max_trace_defect,
        "mean_state": [matrix_to_json(m) for m in ens.mean_state],
    }


def cmd_ensemble(config, out_dir, quiet):
    model = _working_model(config)
    ens = run_ensemble(
        model,
        _initial_state(model),
        config.controller(),
        n_traj=config.trajectories,
        horizon=config.horizon,
        dt=config.dt,
        base_seed=config.seed,
    )
    _write_json(out_dir / "ensemble.json", _ensemble_payload(ens))
    cols = ["t", "mean_v1", "sem_v1", "mean_v2", "sem_v2", "mean_fidelity", "sem_fidelity"]
    lines = [",".join(cols)]
    for i in range(ens.times.shape[0]):
        row = [_fmt(ens.times[i]), _fmt(ens.mean_v1[i]), _fmt(ens.sem_v1[i])]
        if ens.mean_v2 is not None:
            row += [
                _fmt(ens.mean_v2[i]), _fmt(ens.sem_v2[i]),
                _fmt(ens.mean_fidelity[i]), _fmt(ens.sem_fidelity[i]),
            ]
        else:
            row += ["nan", "nan", "nan", "nan"]
        lines.append(",".join(row))
    (out_dir / "ensemble_summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not quiet:
        print(f"chi: {ens.chi:.6g} +/- {ens.chi_se:.3g}")
        print(f"terminal mean v1: {ens.terminal_v1:.6g}")
    seeds = list(range(config.seed, config.seed + config.trajectories))
    write_manifest(out_dir, config, "ensemble", seeds,
                   ["ensemble.json", "ensemble_summary.csv"])
    return 0


def cmd_report(config, out_dir, quiet):
    verdict = stabilization_report(
        config.model,
        controller=config.controller(),
        horizon=config.horizon,
        dt=config.dt,
        n_traj=config.trajectories,
        base_seed=config.seed,
        synthesize=config.synthesize,
        v1_threshold=config.v1_threshold,
        fidelity_threshold=config.fidelity_threshold,
        gain=config.gain,
    )
    payload = {
        "classification": verdict.classification.value,
        "synthesis_applied": verdict.synthesis_applied,
        "chi": verdict.chi,
        "chi_se": verdict.chi_se,
        "terminal_v1": verdict.terminal_v1,
        "terminal_fidelity": None
        if np.isnan(verdict.terminal_fidelity)
        else verdict.terminal_fidelity,
        "v1_threshold": verdict.v1_threshold,
        "fidelity_threshold": verdict.fidelity_threshold,
        "feedback_run": verdict.feedback_run,
        "passed": verdict.passed,
    }
    _write_json(out_dir / "report.json", payload)
    if not quiet:
        print(f"classification: {verdict.classification.value}")
        print(f"terminal v1: {verdict.terminal_v1:.6g} (threshold {verdict.v1_threshold})")
        if verdict.feedback_run:
            print(
                f"terminal fidelity: {verdict.terminal_fidelity:.6g} "
                f"(threshold {verdict.fidelity_threshold})"
            )
        print(f"passed: {verdict.passed}")
    write_manifest(out_dir, config, "report", [config.seed], ["report.json"])
    return 0 if verdict.passed else 4


_COMMANDS = {
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smestab",
        description="Analyze, synthesize and simulate monitored quantum dynamics.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment JSON document")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--trajectories", type=int, default=None,
                        help="override run.trajectories")
    parser.add_argument("--dt", type=float, default=None, help="override run.dt")
    parser.add_argument("--gamma", type=float, default=None,
                        help="override controller.gamma")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.trajectories is not None:
            config.trajectories = args.trajectories
        if args.dt is not None:
            config.dt = args.dt
        if args.gamma is not None:
            if not 0.0 < args.gamma < 1.0:
                raise ConfigError(f"--gamma must lie in (0, 1), got {args.gamma}")
            config.gamma = args.gamma
        out_dir = Path(args.out if args.out is not None else config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, out_dir, args.quiet)
    except IntegrationAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SmestabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
