import numpy as np
import pytest

from smestab import (
    Decomposition,
    Operator,
    QuantumState,
    block,
    project_to_physical,
    projector,
    validate_state,
)
from smestab.errors import DegenerateStateError, DimensionError

from modelzoo import SIGMA_MINUS, random_hermitian, random_state, random_unitary


def test_validate_state_maximally_mixed():
    report = validate_state(np.eye(2) / 2, tol=1e-9)
    assert report.passed
    assert report.violations == ()


def test_validate_state_trace_violation():
    report = validate_state(np.diag([1.0, 1e-6]))
    assert not report.passed
    names = [v[0] for v in report.violations]
    assert names == ["trace"]
    assert report.violations[0][1] == pytest.approx(1e-6)


def test_validate_state_psd_violation():
    # eigenvalues 0.5 +/- 0.6
    report = validate_state(np.array([[0.5, 0.6], [0.6, 0.5]]))
    assert not report.passed
    names = dict((v[0], v[1]) for v in report.violations)
    assert set(names) == {"psd"}
    assert names["psd"] == pytest.approx(0.1, abs=1e-12)


def test_validate_state_rejects_non_square():
    with pytest.raises(DimensionError):
        validate_state(np.ones((2, 3)))


def test_block_2x2_scalar_parts():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    d = Decomposition(dims=(1, 1))
    assert block(x, d, 0, 1) == pytest.approx(np.array([[2.0]]))
    assert block(x, d, 1, 0) == pytest.approx(np.array([[3.0]]))


def test_block_identity_off_diagonal_zero():
    d = Decomposition(dims=(1, 2))
    np.testing.assert_array_equal(block(np.eye(3), d, 1, 0), np.zeros((2, 1)))


def test_block_lowering_operator_pattern():
    d = Decomposition(dims=(1, 1))
    assert block(SIGMA_MINUS, d, 1, 0)[0, 0] == 0.0
    assert block(SIGMA_MINUS, d, 0, 1)[0, 0] == 1.0


def test_block_reassembly_exact(rng):
    for dims in ((1, 3), (2, 2), (3, 1)):
        d = Decomposition(dims=dims)
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        s = dims[0]
        rebuilt = np.block(
            [[block(x, d, 0, 0), block(x, d, 0, 1)],
             [block(x, d, 1, 0), block(x, d, 1, 1)]]
        )
        np.testing.assert_array_equal(rebuilt, x)


def test_block_index_out_of_range():
    d = Decomposition(dims=(1, 1))
    with pytest.raises(DimensionError):
        block(np.eye(2), d, 0, 2)


def test_projector_standard_basis():
    np.testing.assert_array_equal(
        projector(Decomposition(dims=(1, 1)), 0), np.diag([1.0, 0.0])
    )
    np.testing.assert_array_equal(
        projector(Decomposition(dims=(1, 2)), 1), np.diag([0.0, 1.0, 1.0])
    )


def test_projector_conjugated_basis(rng):
    u = random_unitary(rng, 3)
    d = Decomposition(dims=(1, 1, 1), basis=u)
    expected = u @ np.diag([0.0, 1.0, 0.0]).astype(complex) @ u.conj().T
    np.testing.assert_allclose(projector(d, 1), expected, atol=1e-12)


def test_projector_algebra(rng):
    u = random_unitary(rng, 4)
    d = Decomposition(dims=(1, 2, 1), basis=u)
    ps = [projector(d, i) for i in range(3)]
    for i in range(3):
        np.testing.assert_allclose(ps[i] @ ps[i], ps[i], atol=1e-12)
        np.testing.assert_allclose(ps[i], ps[i].conj().T, atol=1e-12)
        assert np.linalg.matrix_rank(ps[i]) == d.dims[i]
        for j in range(3):
            if i != j:
                np.testing.assert_allclose(ps[i] @ ps[j], 0 * ps[i], atol=1e-12)
    np.testing.assert_allclose(sum(ps), np.eye(4), atol=1e-12)


def test_project_to_physical_fixed_point(rng):
    rho = random_state(rng, 3)
    np.testing.assert_allclose(project_to_physical(rho), rho, atol=1e-12)


def test_project_to_physical_clips_and_renormalizes():
    out = project_to_physical(np.diag([1.1, -0.1]))
    np.testing.assert_allclose(out, np.diag([1.0, 0.0]), atol=1e-12)


def test_project_to_physical_small_antihermitian_perturbation():
    base = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
    perturbed = base + 1e-10 * np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = project_to_physical(perturbed)
    assert np.max(np.abs(out - base)) <= 1e-10


def test_project_to_physical_idempotent(rng):
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    once = project_to_physical(x)
    twice = project_to_physical(once)
    np.testing.assert_allclose(once, twice, atol=1e-12)


def test_project_to_physical_validates(rng):
    for _ in range(20):
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert validate_state(project_to_physical(x)).passed


def test_project_to_physical_degenerate():
    with pytest.raises(DegenerateStateError):
        project_to_physical(np.diag([-1.0, -2.0]))


def test_operator_predicates(rng):
    h = Operator(random_hermitian(rng, 3))
    assert h.is_hermitian()
    assert h.is_normal()
    nilpotent = Operator(SIGMA_MINUS)
    assert not nilpotent.is_hermitian(1e-12)
    assert not nilpotent.is_normal(1e-12)
    assert Operator(np.diag([1.0, 1.0j])).is_normal()


def test_quantum_state_validation():
    QuantumState(np.eye(2) / 2)
    with pytest.raises(ValueError):
        QuantumState(np.diag([1.0, 0.5]))
    pure = QuantumState.pure([1.0, 1.0])
    assert np.trace(pure.rho @ pure.rho).real == pytest.approx(1.0)


def test_decomposition_validation(rng):
    with pytest.raises(DimensionError):
        Decomposition(dims=(0, 2))
    with pytest.raises(ValueError):
        Decomposition(dims=(1, 1), basis=np.ones((2, 2)))
    u = random_unitary(rng, 2)
    d = Decomposition(dims=(1, 1), basis=u)
    x = rng.standard_normal((2, 2))
    np.testing.assert_allclose(d.from_adapted(d.to_adapted(x)), x, atol=1e-12)


def test_decomposition_swap_roundtrip(rng):
    u = random_unitary(rng, 3)
    d = Decomposition(dims=(1, 2), basis=u)
    s = d.swapped()
    assert s.dims == (2, 1)
    x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    np.testing.assert_allclose(block(x, s, 1, 0), block(x, d, 0, 1), atol=1e-12)
    np.testing.assert_allclose(block(x, s, 0, 1), block(x, d, 1, 0), atol=1e-12)
