"""Shared model builders for the test suite.

Random models are built block by block so the invariance structure is known
by construction: either both invariance conditions hold exactly, or a
violation of a chosen kind is planted with O(1) magnitude.
"""

import numpy as np

from smestab import ControlModel, Decomposition

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
PLUS = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
GROUND = np.diag([1.0, 0.0]).astype(complex)
EXCITED = np.diag([0.0, 1.0]).astype(complex)


def qubit_decomp():
    return Decomposition(dims=(1, 1))


def decay_model(eta=1.0):
    """Measured amplitude decay onto the first basis vector."""
    return ControlModel(
        H_o=np.zeros((2, 2)), H_f=np.zeros((2, 2)), L=(SIGMA_MINUS,),
        eta=eta, decomp=qubit_decomp(),
    )


def dephasing_model(eta=1.0, kappa=1.0, h_f=None):
    """Measured dephasing qubit; optionally with a feedback Hamiltonian."""
    return ControlModel(
        H_o=np.zeros((2, 2)),
        H_f=np.zeros((2, 2)) if h_f is None else h_f,
        L=(np.sqrt(kappa) * SIGMA_Z,), eta=eta, decomp=qubit_decomp(),
    )


def feedback_qubit(eta=1.0, gamma_unused=None):
    """The canonical feedback target: z-measurement, y-drive, ground target."""
    return dephasing_model(eta=eta, h_f=SIGMA_Y)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_matrix(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_unitary(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, n, rank=None):
    """Random full-rank (or fixed-rank) density matrix."""
    rank = rank or n
    a = random_matrix(rng, (n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_pure_state(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_model(rng, dim, n_ops=2, eta=1.0, dims=None):
    """Unstructured random model (no invariance guarantees), with operator
    norms around one."""
    dims = dims or (1, dim - 1)
    ls = []
    for _ in range(n_ops):
        l = random_matrix(rng, (dim, dim))
        ls.append(1.2 * l / np.linalg.norm(l))
    return ControlModel(
        H_o=random_hermitian(rng, dim, scale=0.5),
        H_f=random_hermitian(rng, dim, scale=0.5),
        L=tuple(ls),
        eta=eta,
        decomp=Decomposition(dims=dims),
    )


def structured_model(rng, dim, s=1, n_ops=2, invariant=True, violation=None,
                     eta=1.0):
    """Model with the target-invariance structure planted or broken.

    With ``invariant=True`` the noise operators are upper block-triangular
    and the Hamiltonian coupling block is set to the unique value satisfying
    the invariance conditions.  Otherwise ``violation`` picks which
    condition to break: "L_Q" or "H_P" (O(1) magnitude).  Operator norms are
    kept around one so fixed-step integrators stay well inside their
    stability regions.
    """
    r = dim - s
    ls = []
    for _ in range(n_ops):
        l = np.zeros((dim, dim), dtype=complex)
        l[:s, :s] = random_matrix(rng, (s, s))
        l[:s, s:] = random_matrix(rng, (s, r))
        l[s:, s:] = random_matrix(rng, (r, r))
        ls.append(1.2 * l / np.linalg.norm(l))
    h = np.zeros((dim, dim), dtype=complex)
    h[:s, :s] = random_hermitian(rng, s, scale=0.5)
    h[s:, s:] = random_hermitian(rng, r, scale=0.5)
    # the coupling block solving i H_P = (1/2) sum_k L_S^dag L_P
    h_p = np.zeros((s, r), dtype=complex)
    for l in ls:
        h_p += -0.5j * l[:s, :s].conj().T @ l[:s, s:]
    h[:s, s:] = h_p
    h[s:, :s] = h_p.conj().T
    if not invariant:
        kind = violation or rng.choice(["L_Q", "H_P"])
        if kind == "L_Q":
            ls[0] = ls[0].copy()
            bump = random_matrix(rng, (r, s))
            ls[0][s:, :s] = 0.5 * bump / np.linalg.norm(bump)
        else:
            bump = random_matrix(rng, (s, r))
            bump = 0.5 * bump / np.linalg.norm(bump)
            h[:s, s:] += bump
            h[s:, :s] += bump.conj().T
    return ControlModel(
        H_o=h, H_f=np.zeros((dim, dim)), L=tuple(ls), eta=eta,
        decomp=Decomposition(dims=(s, r)),
    )


def feedback_class_model(rng, dim, kind="noise", eta=1.0, extra_noise=False):
    """Random model in the feedback-design class: one-dimensional target,
    block-diagonal operators, normal measurement with simple spectrum,
    feedback coupling row nonzero.

    ``kind`` selects which construction branch the recursion will exercise:
    "noise" (generic normal measurement block), "hamiltonian" (diagonal
    measurement, zero drift), "drift" (diagonal measurement, random drift).
    """
    r = dim - 1
    l0 = np.zeros((dim, dim), dtype=complex)
    diag = np.arange(1, dim + 1) + 0.25 * rng.standard_normal(dim)
    if kind == "noise":
        u = random_unitary(rng, r)
        l0[0, 0] = diag[0]
        l0[1:, 1:] = u @ np.diag(diag[1:]).astype(complex) @ u.conj().T
    else:
        np.fill_diagonal(l0, diag)
    h = np.zeros((dim, dim), dtype=complex)
    if kind == "drift":
        h[1:, 1:] = random_hermitian(rng, r)
    h_f = np.zeros((dim, dim), dtype=complex)
    row = random_matrix(rng, (r,))
    row = row / np.linalg.norm(row)
    h_f[0, 1:] = row
    h_f[1:, 0] = row.conj()
    ls = [l0]
    if extra_noise:
        l1 = np.zeros((dim, dim), dtype=complex)
        l1[1:, 1:] = random_matrix(rng, (r, r), scale=0.5)
        ls.append(l1)
    return ControlModel(
        H_o=h, H_f=h_f, L=tuple(ls), eta=eta, decomp=Decomposition(dims=(1, r)),
    )


def openloop_class_model(rng, dim, eta=1.0):
    """Random model with the complement noise-coupled into the target
    (invariance violated only through the Hamiltonian coupling block, which
    the enforcement construction cancels)."""
    r = dim - 1
    l0 = np.zeros((dim, dim), dtype=complex)
    l0[:1, :1] = random_matrix(rng, (1, 1))
    l0[:1, 1:] = random_matrix(rng, (1, r))
    l0[1:, 1:] = random_matrix(rng, (r, r), scale=0.7)
    h = random_hermitian(rng, dim)
    h[1:, :1] = 0.0
    h[:1, 1:] = 0.0
    h += random_hermitian(rng, dim) * 0.0
    bump = random_matrix(rng, (1, r))
    h[:1, 1:] = bump
    h[1:, :1] = bump.conj().T
    return ControlModel(
        H_o=h, H_f=np.zeros((dim, dim)), L=(l0,), eta=eta,
        decomp=Decomposition(dims=(1, r)),
    )
