"""Core numeric types: operators, density matrices, Hilbert-space
decompositions, and the physicality projection used by the SDE integrators.

Matrices are dense complex ndarrays throughout; energies are in angular
frequency units (hbar = 1).  All types are immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStateError, DimensionError

DEFAULT_TOL = 1e-9


def as_matrix(x):
    """Coerce an Operator, QuantumState, or array-like to a square complex
    ndarray."""
    if isinstance(x, Operator):
        return x.entries
    if isinstance(x, QuantumState):
        return x.rho
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(x):
    return np.conj(x).T


def frobenius(x):
    return float(np.linalg.norm(x))


def hermiticity_defect(x):
    """Elementwise max of |X - X^dag|."""
    return float(np.max(np.abs(x - dagger(x))))


def is_hermitian(x, tol=DEFAULT_TOL):
    return hermiticity_defect(as_matrix(x)) <= tol


def is_normal(x, tol=DEFAULT_TOL):
    x = as_matrix(x)
    return float(np.max(np.abs(x @ dagger(x) - dagger(x) @ x))) <= tol


def _freeze(arr):
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Operator:
    """A dense linear operator on the system Hilbert space."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got shape {m.shape}")
        object.__setattr__(self, "entries", _freeze(m))
        object.__setattr__(self, "dim", m.shape[0])

    def is_hermitian(self, tol=DEFAULT_TOL):
        return hermiticity_defect(self.entries) <= tol

    def is_normal(self, tol=DEFAULT_TOL):
        return is_normal(self.entries, tol)


@dataclass(frozen=True)
class QuantumState:
    """A density matrix: Hermitian, positive semidefinite, unit trace."""

    rho: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = as_matrix(self.rho)
        report = validate_state(m)
        if not report.passed:
            raise ValueError(f"not a valid density matrix: {report.violations}")
        object.__setattr__(self, "rho", _freeze(m))
        object.__setattr__(self, "dim", m.shape[0])

    @classmethod
    def pure(cls, vector):
        v = np.asarray(vector, dtype=np.complex128).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, np.conj(v)))


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple

    def __bool__(self):
        return self.passed


def validate_state(rho, tol=DEFAULT_TOL):
    """Check Hermiticity, positive semidefiniteness, and unit trace.

    Each failed check contributes a (name, magnitude) pair to the report.
    """
    m = as_matrix(rho)
    violations = []
    herm = hermiticity_defect(m)
    if herm > tol:
        violations.append(("hermitian", herm))
    trace_err = abs(np.trace(m) - 1.0)
    if trace_err > tol:
        violations.append(("trace", float(trace_err)))
    eigs = np.linalg.eigvalsh(0.5 * (m + dagger(m)))
    neg = float(max(0.0, -eigs.min())) if eigs.size else 0.0
    if neg > tol:
        violations.append(("psd", neg))
    return ValidationReport(passed=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class Decomposition:
    """An orthogonal split of the Hilbert space into two or three summands.

    ``dims`` gives the summand dimensions; ``basis`` optionally maps the
    standard basis to the decomposition-adapted basis (columns are the
    adapted basis vectors).  Block views of operators are taken in the
    adapted basis.
    """

    dims: tuple
    basis: np.ndarray = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d <= 0 for d in dims):
            raise DimensionError(f"summand dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        if self.basis is not None:
            u = as_matrix(self.basis)
            if u.shape[0] != sum(dims):
                raise DimensionError(
                    f"basis is {u.shape[0]}x{u.shape[1]} but dims sum to {sum(dims)}"
                )
            defect = np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0])))
            if defect > DEFAULT_TOL:
                raise ValueError(f"basis is not unitary (defect {defect:.2e})")
            object.__setattr__(self, "basis", _freeze(u))

    @property
    def dim(self):
        return sum(self.dims)

    @property
    def n_parts(self):
        return len(self.dims)

    def offsets(self):
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return out

    def part_slice(self, part):
        if not 0 <= part < len(self.dims):
            raise DimensionError(f"part index {part} out of range for {self.dims}")
        off = self.offsets()
        return slice(off[part], off[part + 1])

    def to_adapted(self, x):
        """Matrix of ``x`` in the adapted basis."""
        m = as_matrix(x)
        if self.basis is None:
            return m
        return dagger(self.basis) @ m @ self.basis

    def from_adapted(self, x):
        """Map a matrix expressed in the adapted basis back to the standard one."""
        m = as_matrix(x)
        if self.basis is None:
            return m
        return self.basis @ m @ dagger(self.basis)

    def swapped(self):
        """The same split with the two parts exchanged (2-part only)."""
        if len(self.dims) != 2:
            raise DimensionError("part swap is defined for 2-part decompositions")
        s, r = self.dims
        perm = np.zeros((self.dim, self.dim))
        perm[s:, :r] = np.eye(r)  # old R columns come first
        perm[:s, r:] = np.eye(s)
        basis = perm if self.basis is None else self.basis @ perm
        return Decomposition(dims=(r, s), basis=basis)


def block(x, decomp, row_part, col_part):
    """Submatrix of ``x`` at the given block position in the adapted basis.

    With two parts the convention is: (0,0) the target block, (0,1) the P
    block, (1,0) the Q block, (1,1) the complement block.
    """
    m = decomp.to_adapted(x)
    if m.shape[0] != decomp.dim:
        raise DimensionError(
            f"operator dim {m.shape[0]} does not match decomposition dim {decomp.dim}"
        )
    return np.array(m[decomp.part_slice(row_part), decomp.part_slice(col_part)])


def projector(decomp, part):
    """Orthogonal projector onto one summand, in the standard basis."""
    p = np.zeros((decomp.dim, decomp.dim), dtype=np.complex128)
    sl = decomp.part_slice(part)
    p[sl, sl] = np.eye(decomp.dims[part])
    return decomp.from_adapted(p)


def project_to_physical(x, trace_floor=1e-14):
    """Repair a near-physical matrix: Hermitize, clip negative eigenvalues,
    renormalize the trace.  Valid density matrices are fixed points.

    Used by the SDE integrators to absorb per-step positivity drift.
    """
    m = as_matrix(x)
    h = 0.5 * (m + dagger(m))
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= trace_floor:
        raise DegenerateStateError("state vanished after clipping negative eigenvalues")
    return (v * (w / total)) @ dagger(v)
