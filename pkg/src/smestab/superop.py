"""Superoperators of the monitored dynamics and derived drift matrices.

The conditioned state follows the Ito diffusion

    d rho = ( F(H, rho) + sum_k D(L_k, rho) ) dt + G(L_0, rho) dW

with Hamiltonian commutator F, dissipators D, and measurement diffusion G;
the deterministic mean evolution drops the dW term.  L_0 is the monitored
channel, L_1..L_r are unmonitored noise channels, and the control enters
through H = H_o + u * H_f.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DEFAULT_TOL,
    Decomposition,
    as_matrix,
    dagger,
    frobenius,
    hermiticity_defect,
    projector,
)
from .errors import DimensionError


@dataclass(frozen=True)
class ControlModel:
    """The tuple (H_o, H_f, {L_k}, eta, decomposition, target state).

    ``L`` may be empty for purely Hamiltonian models; the measurement
    operator is then the zero matrix.  When the target part of the
    decomposition is one-dimensional, ``rho_d`` defaults to the projector
    onto it (the unique pure state supported there).
    """

    H_o: np.ndarray
    H_f: np.ndarray
    L: tuple
    eta: float
    decomp: Decomposition
    rho_d: np.ndarray = None

    def __post_init__(self):
        h_o = np.array(as_matrix(self.H_o))
        h_f = np.array(as_matrix(self.H_f))
        ops = tuple(np.array(as_matrix(l)) for l in self.L)
        dim = self.decomp.dim
        for name, m in (("H_o", h_o), ("H_f", h_f)) + tuple(
            (f"L[{k}]", l) for k, l in enumerate(ops)
        ):
            if m.shape[0] != dim:
                raise DimensionError(f"{name} is {m.shape[0]}x{m.shape[1]}, model dim is {dim}")
        if hermiticity_defect(h_o) > DEFAULT_TOL:
            raise ValueError("H_o must be Hermitian")
        if hermiticity_defect(h_f) > DEFAULT_TOL:
            raise ValueError("H_f must be Hermitian")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"measurement efficiency must be in [0, 1], got {self.eta}")
        rho_d = self.rho_d
        if rho_d is None and self.decomp.dims[0] == 1:
            rho_d = projector(self.decomp, 0)
        if rho_d is not None:
            rho_d = as_matrix(rho_d)
            purity = np.trace(rho_d @ rho_d).real
            if abs(purity - 1.0) > DEFAULT_TOL or abs(np.trace(rho_d) - 1.0) > DEFAULT_TOL:
                raise ValueError("target state must be pure with unit trace")
            p0 = projector(self.decomp, 0)
            if frobenius(rho_d - p0 @ rho_d @ p0) > 1e-8:
                raise ValueError("target state must be supported on the target subspace")
        h_o.flags.writeable = False
        h_f.flags.writeable = False
        for l in ops:
            l.flags.writeable = False
        object.__setattr__(self, "H_o", h_o)
        object.__setattr__(self, "H_f", h_f)
        object.__setattr__(self, "L", ops)
        object.__setattr__(self, "eta", float(self.eta))
        if rho_d is not None:
            rho_d = np.array(rho_d)
            rho_d.flags.writeable = False
        object.__setattr__(self, "rho_d", rho_d)

    @property
    def dim(self):
        return self.decomp.dim

    @property
    def L0(self):
        """The measurement operator (zero matrix when no channels are given)."""
        if self.L:
            return self.L[0]
        return np.zeros((self.dim, self.dim), dtype=np.complex128)

    def hamiltonian(self, u):
        return self.H_o + u * self.H_f

    def with_extra_hamiltonian(self, h_extra):
        """A copy of the model with ``h_extra`` added to the drift Hamiltonian."""
        return replace(self, H_o=self.H_o + as_matrix(h_extra))


def hamiltonian_part(h, rho):
    """Commutator drift F(H, rho) = -i [H, rho]."""
    h = as_matrix(h)
    rho = as_matrix(rho)
    if h.shape != rho.shape:
        raise DimensionError(f"shape mismatch {h.shape} vs {rho.shape}")
    return -1j * (h @ rho - rho @ h)


def dissipator(lk, rho):
    """D(L, rho) = L rho L^dag - (L^dag L rho + rho L^dag L) / 2."""
    lk = as_matrix(lk)
    rho = as_matrix(rho)
    if lk.shape != rho.shape:
        raise DimensionError(f"shape mismatch {lk.shape} vs {rho.shape}")
    ldl = dagger(lk) @ lk
    return lk @ rho @ dagger(lk) - 0.5 * (ldl @ rho + rho @ ldl)


def diffusion(l0, rho, eta):
    """Measurement diffusion G(L, rho) = sqrt(eta) (L rho + rho L^dag - tr((L + L^dag) rho) rho).

    Traceless by construction since tr(L rho + rho L^dag) = tr((L + L^dag) rho).
    """
    l0 = as_matrix(l0)
    rho = as_matrix(rho)
    if l0.shape != rho.shape:
        raise DimensionError(f"shape mismatch {l0.shape} vs {rho.shape}")
    lr = l0 @ rho
    s = lr + dagger(lr)
    return np.sqrt(eta) * (s - np.trace(s).real * rho)


def lindblad_rhs(model, rho, u=0.0):
    """Deterministic drift F(H_o + u H_f, rho) + sum_k D(L_k, rho)."""
    out = hamiltonian_part(model.hamiltonian(u), rho)
    for lk in model.L:
        out += dissipator(lk, rho)
    return out


def sme_drift(model, rho, u=0.0):
    """Drift of the conditioned-state diffusion; equals the deterministic rhs."""
    return lindblad_rhs(model, rho, u)


def sme_diffusion(model, rho):
    """Diffusion coefficient of the conditioned-state equation."""
    return diffusion(model.L0, rho, model.eta)


def ito_drift_matrix(model, u=0.0):
    """Drift matrix of the linear vector unraveling in Ito form:
    -i(H_o + u H_f) - (1/2) sum_k L_k^dag L_k."""
    out = -1j * model.hamiltonian(u)
    for lk in model.L:
        out = out - 0.5 * dagger(lk) @ lk
    return out


def stratonovich_drift_matrix(model, u=0.0):
    """Ito drift minus the conversion correction (1/2) L_0^2.

    Note the correction involves L_0 squared, not L_0^dag L_0.
    """
    l0 = model.L0
    return ito_drift_matrix(model, u) - 0.5 * l0 @ l0


def deterministic_drift_matrix(model):
    """State matrix of the deterministic companion system,
    -i H_o - (1/2) sum_k L_k^dag L_k - (1/2) L_0^2; the input matrix is L_0."""
    return stratonovich_drift_matrix(model, u=0.0)


def generator_linear(model, x, rho, u=0.0):
    """Diffusion generator applied to the linear functional V(rho) = tr(X rho).

    The diffusion term contributes nothing in expectation, so this equals
    tr(X * rhs(rho, u)).
    """
    x = as_matrix(x)
    val = np.trace(x @ lindblad_rhs(model, rho, u))
    return float(val.real)


def generator_quadratic_fidelity(model, rho, u=0.0):
    """Diffusion generator applied to V(rho) = 1 - tr(rho_d rho)^2.

    Equals -2 tr(rho_d rhs) tr(rho_d rho) - tr(rho_d G(L_0, rho))^2; the
    second term is the Ito correction from the quadratic functional.
    """
    if model.rho_d is None:
        raise ValueError("model has no target state")
    rho = as_matrix(rho)
    rho_d = model.rho_d
    drift_part = np.trace(rho_d @ lindblad_rhs(model, rho, u)).real
    fid = np.trace(rho_d @ rho).real
    g_part = np.trace(rho_d @ sme_diffusion(model, rho)).real
    return float(-2.0 * drift_part * fid - g_part * g_part)
