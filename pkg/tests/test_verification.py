import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import random_orthonormal_pair, unitary_from_column
from statemerge.circuit import Circuit, Gate
from statemerge.errors import ResourceError
from statemerge.exact import build_swap_orthogonal
from statemerge.oracle import matrix_oracle
from statemerge.statevector import H, X, PureState, QubitLayout
from statemerge.verification import (
    CSV_COLUMNS,
    IdealTarget,
    build_ideal_merge,
    circuit_to_matrix,
    complete_unitary,
    error_scaling_sweep,
    garbage_sweep,
    optimal_cleanup_angles,
    random_instance,
    unitary_with_first_column,
)

SQ = 1 / math.sqrt(2)


def test_ideal_merge_examples():
    e0, e1 = PureState.basis(1, 0), PureState.basis(1, 1)
    assert np.allclose(build_ideal_merge(e0, e1).completion, np.eye(2))
    assert np.allclose(build_ideal_merge(e1, e0).completion, X)
    plus, minus = PureState([SQ, SQ]), PureState([SQ, -SQ])
    assert np.allclose(build_ideal_merge(plus, minus).completion, H)


def test_ideal_merge_rejects_overlap():
    with pytest.raises(ValueError):
        build_ideal_merge(PureState.basis(1, 0), PureState([SQ, SQ]))


def test_ideal_target_validates():
    with pytest.raises(ValueError):
        IdealTarget(1, ((0, np.array([1, 0])),), np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        IdealTarget(1, ((0, np.array([0, 1])),), np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_ideal_merge_is_unitary_and_deterministic(seed, n):
    rng = np.random.default_rng(seed)
    psi, phi = random_orthonormal_pair(n, rng)
    t = build_ideal_merge(PureState(psi), PureState(phi))
    m = t.completion
    assert np.abs(m @ m.conj().T - np.eye(2**n)).max() <= 1e-10
    assert np.allclose(m[:, 0], psi) and np.allclose(m[:, 1 << (n - 1)], phi)
    again = build_ideal_merge(PureState(psi), PureState(phi)).completion
    assert np.array_equal(m, again)


def test_complete_unitary_skips_dependent_candidates():
    m = complete_unitary({0: np.array([0, 1, 0, 0], complex)}, 4)
    assert np.allclose(m, np.eye(4)[:, [1, 0, 2, 3]])


def test_circuit_to_matrix_examples():
    blk, leak = circuit_to_matrix(Circuit.empty(2))
    assert np.array_equal(blk, np.eye(4)) and not leak.any()
    blk, _ = circuit_to_matrix(Circuit(1, QubitLayout.simple(1), (Gate(X, 0),)))
    assert np.allclose(blk, X)
    swap = build_swap_orthogonal(matrix_oracle(np.eye(2), "U"), matrix_oracle(X, "V"))
    blk, leak = circuit_to_matrix(swap)
    assert np.allclose(blk, X) and leak.max() <= 1e-12
    full = circuit_to_matrix(swap, ancillas_zero=False)
    assert full.shape == (4, 4)
    assert np.allclose(full.conj().T @ full, np.eye(4))


def test_circuit_to_matrix_size_guard():
    with pytest.raises(ResourceError):
        circuit_to_matrix(Circuit.empty(2, 11))


def test_garbage_sweep():
    ident = Circuit.empty(2, 1)
    res = garbage_sweep(ident, trials=5, seed=3)
    assert res.max_leakage == 0.0 and len(res.records) == 5
    dirty = Circuit(2, QubitLayout.simple(1, 1), (Gate(H, 1),))
    assert garbage_sweep(dirty, trials=3).max_leakage == pytest.approx(SQ)
    a = garbage_sweep(dirty, trials=4, seed=9)
    b = garbage_sweep(dirty, trials=4, seed=9)
    assert [r.leakage for r in a.records] == [r.leakage for r in b.records]
    with pytest.raises(ValueError):
        garbage_sweep(ident, trials=0)


def test_exact_swap_leakage_sweep():
    rng = np.random.default_rng(2)
    psi, phi = random_orthonormal_pair(3, rng)
    swap = build_swap_orthogonal(matrix_oracle(unitary_from_column(psi, rng), "U"),
                                 matrix_oracle(unitary_from_column(phi, rng), "V"))
    assert garbage_sweep(swap, trials=100, seed=0).max_leakage <= 1e-9


def test_unitary_with_first_column():
    rng = np.random.default_rng(1)
    v = PureState.random(3, rng, real=True).amplitudes
    q = unitary_with_first_column(v, rng, real=True)
    assert np.allclose(q[:, 0], v)
    assert np.abs(q.imag).max() == 0
    assert np.allclose(q.T @ q, np.eye(8))


def test_random_instance_is_real_and_orthogonal():
    U, V = random_instance(3, np.random.default_rng(0))
    psi, phi = U.matrix[:, 0], V.matrix[:, 0]
    assert abs(np.vdot(psi, phi)) < 1e-12
    assert np.abs(U.matrix.imag).max() == 0


def test_optimal_cleanup_angles_first_step():
    # brute-force search agrees with arccos(c / sqrt(1 + c^2)) at step one
    ang = optimal_cleanup_angles(0.5, 2)
    assert ang[0] == pytest.approx(math.acos(0.5 / math.sqrt(1.25)), abs=1e-8)


def test_error_scaling_sweep_small():
    rows, summary = error_scaling_sweep((1, 2), (0.3,), instances=2, seed=4, trials=3)
    assert [(r["n"], r["instance"]) for r in rows] == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert set(CSV_COLUMNS) <= set(rows[0])
    assert summary["version"] == 1
    assert summary["constant"] == max(max(r["distance_psi"], r["distance_phi"], r["leakage"])
                                      / r["epsilon"] for r in rows)
    again, _ = error_scaling_sweep((1, 2), (0.3,), instances=2, seed=4, trials=3, jobs=2)
    assert again == rows
