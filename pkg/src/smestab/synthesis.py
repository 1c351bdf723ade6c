"""Construction of open-loop Hamiltonian corrections.

Two constructions are provided.  ``enforce_invariance`` cancels the
off-diagonal Hamiltonian block so the target subspace satisfies the
invariance conditions.  ``design_procedure`` (one-dimensional target with a
fixed feedback coupling) and ``synthesize_open_loop`` (noise-coupled target)
build a correction supported on the complement that leaves no stationary
state there, by iteratively peeling one complement direction per step: a
direction already reached by noise or drift is split off, and when neither
reaches, a small Hermitian coupling from the most recently peeled direction
into the remaining space is added.

Every output leaves the target rows and columns untouched, so the target
invariance report is unchanged by construction.
"""

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, as_matrix, block, dagger, frobenius
from .errors import (
    AssumptionError,
    DimensionError,
    FeedbackCouplingError,
    NotStabilizableError,
    TargetNotInvariantableError,
)
from .invariance import (
    Stabilizability,
    check_invariant,
    openloop_stabilizable,
    stationary_support,
)

BRANCH_NOISE = "noise_connected"
BRANCH_HAMILTONIAN = "hamiltonian_added"
BRANCH_DRIFT = "drift_connected"


@dataclass(frozen=True)
class SynthesisStep:
    index: int
    branch: str
    direction: np.ndarray
    coupling: complex


@dataclass(frozen=True)
class SynthesisTrace:
    """Audit record of the iterative construction.

    ``chain`` lists the one-dimensional directions split off the complement
    in order, starting with the seed coupling direction; together with the
    target part they form the final decomposition.  ``H_c`` is the
    accumulated correction in the caller's basis.
    """

    steps: tuple
    H_c: np.ndarray
    chain: tuple


def _operator_scale(model):
    mats = [model.H_o, model.H_f] + list(model.L)
    return max([1.0] + [frobenius(m) for m in mats])


def enforce_invariance(model, decomp=None):
    """The minimal Hermitian correction restoring target invariance:
    populates only the off-diagonal blocks, with
    P-block = -H_P - (i/2) sum_k L_{k,S}^dag L_{k,P}."""
    dec = decomp if decomp is not None else model.decomp
    if dec.n_parts != 2:
        raise DimensionError("invariance enforcement needs a 2-part decomposition")
    threshold = DEFAULT_TOL * _operator_scale(model)
    for k, lk in enumerate(model.L):
        if frobenius(block(lk, dec, 1, 0)) > threshold:
            raise TargetNotInvariantableError(
                f"noise operator {k} couples the complement into the target"
            )
    corr = -block(model.H_o, dec, 0, 1)
    for lk in model.L:
        corr = corr - 0.5j * dagger(block(lk, dec, 0, 0)) @ block(lk, dec, 0, 1)
    s = dec.dims[0]
    adapted = np.zeros((dec.dim, dec.dim), dtype=np.complex128)
    adapted[:s, s:] = corr
    adapted[s:, :s] = dagger(corr)
    return dec.from_adapted(adapted)


def check_feedback_assumptions(model, tol=DEFAULT_TOL):
    """Violations of the structural assumptions of the feedback design:
    one-dimensional target, block-diagonal drift Hamiltonian and noise
    operators, and a normal measurement operator with simple spectrum."""
    violations = []
    dec = model.decomp
    if dec.n_parts != 2:
        return ["decomposition must have two parts"]
    scale = _operator_scale(model)
    threshold = tol * scale
    if dec.dims[0] != 1:
        violations.append(f"target part must be one-dimensional, got {dec.dims[0]}")
    if frobenius(block(model.H_o, dec, 0, 1)) > threshold:
        violations.append("drift Hamiltonian couples target and complement")
    for k, lk in enumerate(model.L):
        if (
            frobenius(block(lk, dec, 0, 1)) > threshold
            or frobenius(block(lk, dec, 1, 0)) > threshold
        ):
            violations.append(f"noise operator {k} is not block-diagonal")
    if not model.L:
        violations.append("a measurement operator is required")
    else:
        l0 = model.L0
        if frobenius(l0 @ dagger(l0) - dagger(l0) @ l0) > threshold * max(1.0, scale):
            violations.append("measurement operator is not normal")
        else:
            eigs = np.linalg.eigvals(l0)
            gaps = [
                abs(eigs[i] - eigs[j])
                for i in range(len(eigs))
                for j in range(i + 1, len(eigs))
            ]
            if gaps and min(gaps) <= threshold:
                violations.append("measurement operator has a degenerate spectrum")
    return violations


def _orthocomplement_within(z, direction, cutoff=1e-12):
    """Orthonormal basis of span(z columns) minus span(direction)."""
    proj = z - np.outer(direction, np.conj(direction) @ z)
    if proj.shape[1] == 0:
        return proj
    u, sv, _ = np.linalg.svd(proj, full_matrices=False)
    keep = sv > cutoff * max(1.0, sv[0] if sv.size else 0.0)
    cols = u[:, keep]
    return cols[:, : z.shape[1] - 1]


def design_procedure(model, gain=1.0, tol=DEFAULT_TOL):
    """Iterative correction for a one-dimensional target with feedback
    coupling fixed by the model.

    Seeds the chain with the adjoint of the feedback coupling row, then per
    step: if a noise operator maps the remaining space onto the chain head,
    peel that direction (noise branch); otherwise evaluate the drift
    coupling row and peel its adjoint direction (drift branch); if the drift
    row vanishes, first add a Hermitian coupling of strength ``gain`` from
    the head to the first remaining direction (hamiltonian branch).
    Terminates in at most dim steps.
    """
    dec = model.decomp
    scale = _operator_scale(model)
    threshold = tol * scale
    h_f_p = block(model.H_f, dec, 0, 1) if dec.n_parts == 2 else None
    if h_f_p is not None and frobenius(h_f_p) <= threshold:
        raise FeedbackCouplingError(
            ["feedback Hamiltonian does not couple the target to the complement"]
        )
    violations = check_feedback_assumptions(model, tol)
    if violations:
        raise AssumptionError(violations)
    n = dec.dim
    r = n - 1
    h_o_r = block(model.H_o, dec, 1, 1)
    l_r = [block(lk, dec, 1, 1) for lk in model.L]
    c = np.conj(h_f_p.ravel())
    c = c / np.linalg.norm(c)
    z = _orthocomplement_within(np.eye(r, dtype=np.complex128), c)
    chain = [c]
    steps = []
    h_c_r = np.zeros((r, r), dtype=np.complex128)
    index = 0
    while z.shape[1] > 0:
        newdir_z = None
        branch = None
        coupling = None
        for lk in l_r:
            row = np.conj(c) @ lk @ z
            if np.linalg.norm(row) > threshold:
                newdir_z = np.conj(row)
                coupling = np.linalg.norm(row)
                branch = BRANCH_NOISE
                break
        if newdir_z is None:
            h_now = h_o_r + h_c_r
            v_w = -1j * (np.conj(c) @ h_now @ z)
            for lk in l_r:
                l_y_dag = np.conj(np.conj(z).T @ lk @ c)
                l_z = np.conj(z).T @ lk @ z
                v_w = v_w - 0.5 * (l_y_dag @ l_z)
            if np.linalg.norm(v_w) <= threshold:
                z1 = z[:, 0]
                h_c_r = h_c_r + gain * (
                    np.outer(c, np.conj(z1)) + np.outer(z1, np.conj(c))
                )
                newdir_z = np.zeros(z.shape[1], dtype=np.complex128)
                newdir_z[0] = 1.0
                coupling = gain
                branch = BRANCH_HAMILTONIAN
            else:
                newdir_z = np.conj(v_w)
                coupling = np.linalg.norm(v_w)
                branch = BRANCH_DRIFT
        new_c = z @ (newdir_z / np.linalg.norm(newdir_z))
        new_c = new_c / np.linalg.norm(new_c)
        steps.append(
            SynthesisStep(
                index=index, branch=branch,
                direction=_embed_direction(dec, new_c), coupling=complex(coupling),
            )
        )
        chain.append(new_c)
        z = _orthocomplement_within(z, new_c)
        c = new_c
        index += 1
    adapted = np.zeros((n, n), dtype=np.complex128)
    adapted[1:, 1:] = h_c_r
    h_c = dec.from_adapted(adapted)
    return SynthesisTrace(
        steps=tuple(steps), H_c=h_c,
        chain=tuple(_embed_direction(dec, v) for v in chain),
    )


def _embed_direction(dec, v_r):
    """Lift a complement-coordinates vector to the caller's basis."""
    s = dec.dims[0]
    full = np.zeros(dec.dim, dtype=np.complex128)
    full[s:] = v_r
    if dec.basis is not None:
        full = dec.basis @ full
    return full


def synthesize_open_loop(model, decomp=None, gain=1.0, tol=DEFAULT_TOL):
    """Open-loop correction for a noise-coupled target: the invariance
    enforcement plus a complement-supported coupling chain seeded by the
    noise blocks.  The result is meant to be verified spectrally with
    ``verify_synthesis``."""
    dec = decomp if decomp is not None else model.decomp
    cls = openloop_stabilizable(model, dec, tol)
    if cls is not Stabilizability.STABILIZABLE:
        if cls is Stabilizability.TARGET_NOT_INVARIANTABLE:
            raise TargetNotInvariantableError(
                "a noise operator couples the complement into the target"
            )
        raise NotStabilizableError(cls)
    h_en = enforce_invariance(model, dec)
    scale = _operator_scale(model)
    threshold = tol * scale
    n = dec.dim
    s = dec.dims[0]
    h_aug = dec.to_adapted(model.H_o + h_en)
    l_ad = [dec.to_adapted(lk) for lk in model.L]
    eye = np.eye(n, dtype=np.complex128)
    g = eye[:, :s].copy()
    z = eye[:, s:].copy()
    hc = np.zeros((n, n), dtype=np.complex128)
    c_last = None
    while z.shape[1] > 0:
        newdir_z = None
        for lk in l_ad:
            wblk = np.conj(g).T @ lk @ z
            if frobenius(wblk) > threshold:
                _, _, vh = np.linalg.svd(wblk)
                newdir_z = np.conj(vh[0])
                break
        if newdir_z is None:
            vblk = -1j * (np.conj(g).T @ (h_aug + hc) @ z)
            for lk in l_ad:
                vblk = vblk - 0.5 * (np.conj(g).T @ dagger(lk) @ z) @ (
                    np.conj(z).T @ lk @ z
                )
            if frobenius(vblk) <= threshold:
                if c_last is None:
                    raise NotStabilizableError(Stabilizability.NEEDS_FEEDBACK)
                z1 = z[:, 0]
                hc = hc + gain * (
                    np.outer(c_last, np.conj(z1)) + np.outer(z1, np.conj(c_last))
                )
                newdir_z = np.zeros(z.shape[1], dtype=np.complex128)
                newdir_z[0] = 1.0
            else:
                _, _, vh = np.linalg.svd(vblk)
                newdir_z = np.conj(vh[0])
        new_c = z @ (newdir_z / np.linalg.norm(newdir_z))
        new_c = new_c / np.linalg.norm(new_c)
        g = np.hstack([g, new_c[:, None]])
        z = _orthocomplement_within(z, new_c)
        c_last = new_c
    return h_en + dec.from_adapted(hc)


@dataclass(frozen=True)
class SynthesisVerification:
    """Combined verdict: target invariance at zero control, and absence of
    complement-supported stationary states at the constant control used for
    destabilization."""

    invariance: "InvarianceReport"
    stationary: "StationaryReport"
    u_bar: float

    @property
    def verified(self):
        return bool(
            self.invariance.invariant
            and not self.stationary.has_R_supported_stationary_state
        )


def verify_synthesis(model, h_extra, u_bar=0.0, tol=1e-8):
    """Check a candidate correction: with drift Hamiltonian H_o + h_extra,
    the target stays invariant (control off) and the generator kernel at
    constant control ``u_bar`` holds no state supported on the complement."""
    augmented = model.with_extra_hamiltonian(as_matrix(h_extra))
    inv = check_invariant(augmented, u=0.0, tol=tol)
    stat = stationary_support(augmented, u=u_bar, tol=tol)
    return SynthesisVerification(invariance=inv, stationary=stat, u_bar=float(u_bar))


def random_hamiltonian_fallback(model, u_bar=1.0, gain=1.0, seed=0, attempts=32,
                                tol=1e-8):
    """Randomized alternative to the deterministic recursion: draw Hermitian
    corrections supported on the complement until one verifies.

    Useful when the structural assumptions of ``design_procedure`` fail but
    a generic complement coupling still destabilizes every stray invariant
    set."""
    dec = model.decomp
    s = dec.dims[0]
    r = dec.dim - s
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        a = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        h_r = 0.5 * (a + dagger(a)) * gain / np.sqrt(r)
        adapted = np.zeros((dec.dim, dec.dim), dtype=np.complex128)
        adapted[s:, s:] = h_r
        candidate = dec.from_adapted(adapted)
        if verify_synthesis(model, candidate, u_bar=u_bar, tol=tol).verified:
            return candidate
    raise AssumptionError(
        [f"no verified random correction found in {attempts} attempts"]
    )
