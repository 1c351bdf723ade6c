"""Block-algebraic invariance and stabilizability tests.

A two-part split H = H_S (+) H_R makes the target set of states supported on
H_S invariant iff every noise operator has zero lower-left block and
i H_P - (1/2) sum_k L_{k,S}^dag L_{k,P} = 0.  The tests here evaluate those
conditions, their complement-side version, the observability-type escape
criterion for the companion linear flow, the operator conditions that rule
out invariant sets in the tail of a three-part split, and the stationary
(kernel) analysis of the vectorized generator.

Rank and kernel decisions use singular values against a relative threshold
tol * sigma_max.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import DEFAULT_TOL, as_matrix, block, dagger, frobenius
from .errors import DimensionError, NoStationaryStateError


class Stabilizability(Enum):
    STABILIZABLE = "Stabilizable"
    NEEDS_FEEDBACK = "NeedsFeedback"
    TARGET_NOT_INVARIANTABLE = "TargetNotInvariantable"


@dataclass(frozen=True)
class InvarianceReport:
    """Residual norms of the two invariance conditions.

    ``witnesses`` holds (condition-id, operator-index, residual-norm) for
    every check; the operator index is -1 for the Hamiltonian condition.
    ``invariant`` holds iff every residual is at most ``threshold``.
    """

    invariant: bool
    witnesses: tuple
    threshold: float

    @property
    def violations(self):
        return tuple(w for w in witnesses_above(self.witnesses, self.threshold))


def witnesses_above(witnesses, threshold):
    return (w for w in witnesses if w[2] > threshold)


def _operator_scale(model, u=0.0):
    mats = [model.hamiltonian(u)] + list(model.L)
    return max([1.0] + [frobenius(m) for m in mats])


def check_invariant(model, decomp=None, u=0.0, tol=DEFAULT_TOL):
    """Evaluate the target-invariance block conditions at control value ``u``."""
    d = decomp if decomp is not None else model.decomp
    if d.n_parts != 2:
        raise DimensionError("invariance conditions need a 2-part decomposition")
    if d.dim != model.dim:
        raise DimensionError(
            f"decomposition dim {d.dim} does not match model dim {model.dim}"
        )
    h = model.hamiltonian(u)
    witnesses = []
    cond = 1j * block(h, d, 0, 1)
    for k, lk in enumerate(model.L):
        witnesses.append(("L_Q", k, frobenius(block(lk, d, 1, 0))))
        cond = cond - 0.5 * dagger(block(lk, d, 0, 0)) @ block(lk, d, 0, 1)
    witnesses.append(("H_P", -1, frobenius(cond)))
    threshold = tol * _operator_scale(model, u)
    invariant = all(w[2] <= threshold for w in witnesses)
    return InvarianceReport(invariant=invariant, witnesses=tuple(witnesses),
                            threshold=threshold)


def check_R_not_invariant(model, decomp=None, u=0.0, tol=DEFAULT_TOL):
    """True iff the complement subspace fails the invariance conditions
    (evaluated with the two parts swapped)."""
    d = decomp if decomp is not None else model.decomp
    return not check_invariant(model, d.swapped(), u, tol).invariant


def openloop_stabilizable(model, decomp=None, tol=DEFAULT_TOL):
    """Classify whether a time-independent Hamiltonian can make the target
    globally attractive.

    The split is on the noise blocks alone: any lower-left block rules the
    target out entirely; otherwise some upper-right block must pump the
    complement into the target, else feedback is required.
    """
    d = decomp if decomp is not None else model.decomp
    if d.n_parts != 2:
        raise DimensionError("stabilizability test needs a 2-part decomposition")
    threshold = tol * _operator_scale(model)
    q_norms = [frobenius(block(lk, d, 1, 0)) for lk in model.L]
    p_norms = [frobenius(block(lk, d, 0, 1)) for lk in model.L]
    if any(n > threshold for n in q_norms):
        return Stabilizability.TARGET_NOT_INVARIANTABLE
    if any(n > threshold for n in p_norms):
        return Stabilizability.STABILIZABLE
    return Stabilizability.NEEDS_FEEDBACK


def observability_escape(a, decomp, tol=DEFAULT_TOL):
    """True iff every trajectory of dx/dt = A x starting in the complement
    eventually acquires a target component.

    Equivalent to the stacked matrix with rows P_S A^k restricted to the
    complement (k = 0..dim-1) having trivial kernel.
    """
    a = decomp.to_adapted(as_matrix(a))
    if decomp.n_parts != 2:
        raise DimensionError("escape test needs a 2-part decomposition")
    s, r = decomp.dims
    n = decomp.dim
    rows = []
    power = np.eye(n, dtype=np.complex128)
    for _ in range(n):
        rows.append(power[:s, s:])
        power = a @ power
    stacked = np.vstack(rows)
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return False
    return bool(sv[-1] > tol * sv[0])


def deterministic_invariance(model, decomp=None, tol=DEFAULT_TOL):
    """Invariance of the target for the companion linear flow: both the
    drift matrix -i H_o - (1/2) sum_k L_k^dag L_k - (1/2) L_0^2 and the
    input matrix L_0 must have zero lower-left blocks."""
    from .superop import deterministic_drift_matrix

    d = decomp if decomp is not None else model.decomp
    if d.n_parts != 2:
        raise DimensionError("invariance conditions need a 2-part decomposition")
    threshold = tol * _operator_scale(model)
    drift_q = frobenius(block(deterministic_drift_matrix(model), d, 1, 0))
    input_q = frobenius(block(model.L0, d, 1, 0))
    return bool(drift_q <= threshold and input_q <= threshold)


@dataclass(frozen=True)
class EscapeConditionsReport:
    """Operator conditions ruling out invariant sets supported on the tail
    part of a three-part split.

    ``scond_universal`` certifies the noise condition for every tail state
    (trivial common kernel of the coupling rows).  ``v_w`` is the drift
    coupling operator; per-probe values report the noise term, the drift
    term norm, and whether either is nonzero at the probe.
    """

    scond_universal: bool
    v_w: np.ndarray
    probe_scond: tuple
    probe_pcond_norm: tuple
    probe_ok: tuple


def escape_conditions(model, decomp3, probes=(), tol=DEFAULT_TOL):
    """Evaluate the two escape conditions on a S (+) C (+) Z split with a
    one-dimensional middle part.

    For a state supported on the tail, the generator pushes weight into the
    middle direction if either sum_k L_W rho_Z L_W^dag != 0 (noise) or
    V_W rho_Z + sum_k L_W rho_Z L_Z^dag != 0 (drift), with
    V_W = -i H_W - (1/2) sum_k (L_C^dag L_W + L_Y^dag L_Z).
    """
    if decomp3.n_parts != 3:
        raise DimensionError("escape conditions need a 3-part decomposition")
    if decomp3.dims[1] != 1:
        raise DimensionError("the middle part must be one-dimensional")
    z = decomp3.dims[2]
    threshold = tol * _operator_scale(model)
    l_w = [block(lk, decomp3, 1, 2) for lk in model.L]
    l_c = [block(lk, decomp3, 1, 1) for lk in model.L]
    l_y = [block(lk, decomp3, 2, 1) for lk in model.L]
    l_z = [block(lk, decomp3, 2, 2) for lk in model.L]
    if l_w:
        stacked = np.vstack(l_w)
        sv = np.linalg.svd(stacked, compute_uv=False)
        scond_universal = bool(sv.size >= z and sv[0] > 0.0 and sv[z - 1] > tol * sv[0])
    else:
        scond_universal = False
    v_w = -1j * block(model.H_o, decomp3, 1, 2)
    for lc, lw, ly, lz in zip(l_c, l_w, l_y, l_z):
        v_w = v_w - 0.5 * (dagger(lc) @ lw + dagger(ly) @ lz)
    probe_scond = []
    probe_pcond = []
    probe_ok = []
    for rho_z in probes:
        rho_z = as_matrix(rho_z)
        sval = 0.0
        pvec = v_w @ rho_z
        for lw, lz in zip(l_w, l_z):
            sval += float((lw @ rho_z @ dagger(lw))[0, 0].real)
            pvec = pvec + lw @ rho_z @ dagger(lz)
        pnorm = frobenius(pvec)
        probe_scond.append(sval)
        probe_pcond.append(pnorm)
        probe_ok.append(bool(sval > threshold or pnorm > threshold))
    return EscapeConditionsReport(
        scond_universal=scond_universal, v_w=v_w, probe_scond=tuple(probe_scond),
        probe_pcond_norm=tuple(probe_pcond), probe_ok=tuple(probe_ok),
    )


def liouvillian_matrix(model, u=0.0):
    """dim^2 x dim^2 matrix of rho -> rhs(rho, u) under column stacking."""
    d = model.dim
    eye = np.eye(d, dtype=np.complex128)
    h = model.hamiltonian(u)
    out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for lk in model.L:
        ldl = dagger(lk) @ lk
        out += np.kron(np.conj(lk), lk)
        out -= 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    return out


def _vec(x):
    return np.asarray(x).flatten(order="F")


def _unvec(v, d):
    return np.asarray(v).reshape((d, d), order="F")


@dataclass(frozen=True)
class StationaryReport:
    """Kernel analysis of the vectorized generator.

    ``has_R_supported_stationary_state`` reports whether the scan found a
    positive-semidefinite unit-trace kernel element supported on the
    complement; ``offending_state`` carries it.  A zero restricted kernel
    (``r_restricted_kernel_dimension`` == 0) certifies absence; otherwise a
    negative scan over a large kernel is flagged as inconclusive.
    """

    kernel_dimension: int
    has_R_supported_stationary_state: bool
    offending_state: np.ndarray
    r_restricted_kernel_dimension: int
    conclusive: bool


def _hermitian_kernel_basis(kernel_mats):
    basis = []
    for x in kernel_mats:
        for h in (0.5 * (x + dagger(x)), 0.5j * (x - dagger(x))):
            for b in basis:
                h = h - np.trace(b @ h).real * b
            nrm = frobenius(h)
            if nrm > 1e-10:
                basis.append(h / nrm)
    return basis


def _scan_for_state(h_basis, p_s, tol):
    """Search the real span of Hermitian kernel elements for a PSD unit-trace
    matrix supported off the target: singletons first, then planar sweeps
    through every pair."""
    candidates = []
    for h in h_basis:
        candidates.append(h)
        candidates.append(-h)
    thetas = np.linspace(0.0, 2.0 * np.pi, 72, endpoint=False)
    for i in range(len(h_basis)):
        for j in range(i + 1, len(h_basis)):
            for th in thetas:
                candidates.append(np.cos(th) * h_basis[i] + np.sin(th) * h_basis[j])
    for c in candidates:
        tr = np.trace(c).real
        if abs(tr) < 1e-10:
            continue
        rho = c / tr
        eigs = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
        if eigs.min() < -max(tol, 1e-10):
            continue
        if np.trace(p_s @ rho).real > max(tol, 1e-10):
            continue
        return rho
    return None


def stationary_support(model, u=0.0, decomp=None, tol=DEFAULT_TOL):
    """Find stationary states of the generator supported on the complement.

    Builds the vectorized generator, extracts its kernel by SVD, and scans
    the kernel's Hermitian section (basis elements and pairwise real
    combinations) for a PSD unit-trace element with no target weight.
    """
    from .core import projector

    d_model = model.dim
    dec = decomp if decomp is not None else model.decomp
    lh = liouvillian_matrix(model, u)
    _, s, vh = np.linalg.svd(lh)
    sigma_max = s[0] if s.size else 0.0
    if sigma_max == 0.0:
        kernel_vecs = list(np.eye(d_model * d_model, dtype=np.complex128).T)
    else:
        kernel_vecs = [np.conj(vh[i]) for i in range(s.size) if s[i] <= tol * sigma_max]
    kdim = len(kernel_vecs)
    if kdim == 0:
        raise NoStationaryStateError(
            f"generator kernel numerically empty (sigma_min {s[-1]:.2e})"
        )
    kernel_mats = [_unvec(v, d_model) for v in kernel_vecs]
    h_basis = _hermitian_kernel_basis(kernel_mats)
    p_s = projector(dec, 0)
    found = _scan_for_state(h_basis, p_s, tol)

    # restricted kernel: the generator as a map on matrices supported on the
    # complement; a trivial kernel certifies that no stationary state lives
    # there, regardless of the scan
    r_slice = dec.part_slice(dec.n_parts - 1)
    r_dim = dec.dims[-1]
    emb_cols = np.zeros((d_model * d_model, r_dim * r_dim), dtype=np.complex128)
    col = 0
    eye_r = np.eye(r_dim)
    for j in range(r_dim):
        for i in range(r_dim):
            adapted = np.zeros((d_model, d_model), dtype=np.complex128)
            adapted[r_slice, r_slice] = np.outer(eye_r[:, i], eye_r[j, :])
            emb_cols[:, col] = _vec(dec.from_adapted(adapted))
            col += 1
    restricted = lh @ emb_cols
    sv_r = np.linalg.svd(restricted, compute_uv=False)
    if sv_r.size == 0 or sv_r[0] == 0.0:
        r_kdim = r_dim * r_dim
    else:
        r_kdim = int(np.sum(sv_r <= tol * sv_r[0]))
    conclusive = found is not None or r_kdim == 0 or kdim <= 2
    return StationaryReport(
        kernel_dimension=kdim,
        has_R_supported_stationary_state=found is not None,
        offending_state=found,
        r_restricted_kernel_dimension=r_kdim,
        conclusive=bool(conclusive),
    )
