import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import (
    embed_main,
    leakage,
    random_orthonormal_pair,
    reflection_flip,
    swap_reference,
    unitary_from_column,
)
from statemerge.errors import ContractError
from statemerge.exact import (
    NotApplicable,
    build_exact_merge_special,
    build_state_control,
    build_superposition_prep,
    build_swap_orthogonal,
    build_zero_control,
    detect_special_case,
    harden_clean_preparation,
    shared_span_merge,
)
from statemerge.oracle import matrix_oracle
from statemerge.statevector import H, X, PureState
from statemerge.verification import circuit_to_matrix, garbage_oracle, garbage_sweep

SQ = 1 / math.sqrt(2)


def oracles_for(psi, phi, rng):
    return (matrix_oracle(unitary_from_column(psi, rng), "U"),
            matrix_oracle(unitary_from_column(phi, rng), "V"))


def run(circ, main_vec):
    n = circ.n_main
    return circ.run(PureState(embed_main(main_vec, n, circ.num_qubits))).amplitudes


# zero and state controls -------------------------------------------------------

def test_zero_control_examples():
    assert np.allclose(run(build_zero_control(1), [1, 0]), np.eye(4)[0b10])
    assert np.allclose(run(build_zero_control(2), np.eye(4)[0b10]), np.eye(8)[0b010])
    # |+> on the first bit (wire 2), target on wire 3
    main = (np.eye(8)[0b000] + np.eye(8)[0b100]) * SQ
    expect = (np.eye(16)[0b1000] + np.eye(16)[0b0100]) * SQ
    assert np.allclose(run(build_zero_control(3), main), expect)


def test_state_control_examples():
    assert np.allclose(run(build_state_control(matrix_oracle(X)), [0, 1]), np.eye(4)[0b11])
    minus = np.array([SQ, -SQ])
    plus = np.array([SQ, SQ])
    cH = build_state_control(matrix_oracle(H))
    assert np.allclose(run(cH, minus), embed_main(minus, 1, 2))
    assert np.allclose(run(cH, plus), np.kron([0, 1], plus))


def test_state_control_matches_reflection_reference():
    rng = np.random.default_rng(4)
    psi = PureState.random(2, rng).amplitudes
    circ = build_state_control(matrix_oracle(unitary_from_column(psi, rng)))
    blk = circ.run_main(np.eye(4)).column_vectors()
    ref = reflection_flip(psi, 2, 2, 3)[:, :4]
    assert np.allclose(blk, ref, atol=1e-12)


def test_state_control_with_dirty_oracle():
    # the oracle's own ancillas come back clean; only the target may flip
    rng = np.random.default_rng(9)
    psi = PureState.random(2, rng).amplitudes
    U = garbage_oracle(unitary_from_column(psi, rng), 2)
    circ = build_state_control(U)
    out = circ.run_main(np.eye(4)).column_vectors()
    ref = reflection_flip(embed_main(psi, 2, 4), 4, 4, 5)[:, :4]
    assert np.allclose(out, ref, atol=1e-12)
    assert garbage_sweep(circ.then(circ), trials=50, seed=1).max_leakage <= 1e-9


# swap --------------------------------------------------------------------------

def test_swap_sends_psi_to_phi_cleanly():
    U, V = matrix_oracle(np.eye(4), "U"), matrix_oracle(np.kron(X, np.eye(2)), "V")
    swap = build_swap_orthogonal(U, V)
    out = run(swap, np.eye(4)[0])
    assert np.allclose(out[:4], np.eye(4)[0b10])
    assert leakage(out, 2) == 0.0


def test_swap_final_line_structure():
    # alpha|psi> + beta|phi> + gamma|y> -> (alpha|phi> + beta|psi> + gamma|y>)|0>
    U, V = matrix_oracle(np.eye(4), "U"), matrix_oracle(np.kron(X, np.eye(2)), "V")
    a, b, g = 0.6, 0.48, 0.64
    out = run(build_swap_orthogonal(U, V), a * np.eye(4)[0] + b * np.eye(4)[2] + g * np.eye(4)[1])
    assert np.allclose(out, embed_main(a * np.eye(4)[2] + b * np.eye(4)[0] + g * np.eye(4)[1],
                                       2, out.shape[0].bit_length() - 1))


def test_swap_query_count_is_ten():
    U, V = matrix_oracle(H, "U"), matrix_oracle(H @ X, "V")
    counts = build_swap_orthogonal(U, V).query_counts()
    # two state tests on psi and the U half of each W use U; V the rest
    assert counts["U"] == {"adjoint": 2, "apply": 2, "controlled_adjoint": 1,
                           "controlled_apply": 1}
    assert counts["V"] == {"adjoint": 1, "apply": 1, "controlled_adjoint": 1,
                           "controlled_apply": 1}


def test_swap_rejects_overlapping_targets():
    with pytest.raises(ContractError):
        build_swap_orthogonal(matrix_oracle(H, "U"), matrix_oracle(np.eye(2), "V"))


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3))
def test_swap_matches_reference_and_is_involution(seed, n):
    rng = np.random.default_rng(seed)
    psi, phi = random_orthonormal_pair(n, rng)
    swap = build_swap_orthogonal(*oracles_for(psi, phi, rng))
    blk, leak = circuit_to_matrix(swap)
    assert np.abs(blk - swap_reference(psi, phi)).max() <= 1e-8
    assert leak.max() <= 1e-9
    twice = swap.then(swap)
    blk2, _ = circuit_to_matrix(twice)
    assert np.abs(blk2 - np.eye(2**n)).max() <= 1e-9


# hardening ---------------------------------------------------------------------

def test_harden_x_is_x():
    blk, leak = circuit_to_matrix(harden_clean_preparation(matrix_oracle(X)))
    assert np.allclose(blk, X, atol=1e-12)
    assert leak.max() <= 1e-12


@pytest.mark.parametrize("m", [1, 2])
def test_harden_garbage_oracle(m):
    rng = np.random.default_rng(20 + m)
    psi = PureState.random(2, rng).amplitudes
    psi[0] = 0
    psi /= np.linalg.norm(psi)
    circ = harden_clean_preparation(garbage_oracle(unitary_from_column(psi, rng), m))
    # psi goes back to |0>, ancillas clean
    out = run(circ, psi)
    assert np.allclose(out[:4], np.eye(4)[0], atol=1e-9)
    assert leakage(out, 2) <= 1e-9
    blk, leak = circuit_to_matrix(circ)
    assert np.abs(blk - swap_reference(np.eye(4)[0].astype(complex), psi)).max() <= 1e-8
    assert leak.max() <= 1e-9


def test_harden_requires_orthogonal_to_zero():
    with pytest.raises(ContractError):
        harden_clean_preparation(matrix_oracle(H))


# superposition -----------------------------------------------------------------

def test_superposition_degenerate_rotation():
    rng = np.random.default_rng(3)
    psi, phi = random_orthonormal_pair(2, rng)
    U, V = oracles_for(psi, phi, rng)
    blk, _ = circuit_to_matrix(build_superposition_prep(U, V, 1, 0))
    assert np.allclose(blk[:, 0], psi)


def test_superposition_plus_from_identity_and_x():
    U, V = matrix_oracle(np.eye(2), "U"), matrix_oracle(X, "V")
    blk, leak = circuit_to_matrix(build_superposition_prep(U, V, SQ, SQ))
    assert np.allclose(blk[:, 0], [SQ, SQ])
    assert leak.max() <= 1e-12


def test_superposition_hadamard_pair():
    # alpha=0.6, beta=0.8, psi=|+>, phi=|->: 0.6|+> + 0.8|-> = (1.4, -0.2)/sqrt2
    U, V = matrix_oracle(H, "U"), matrix_oracle(H @ X, "V")
    blk, _ = circuit_to_matrix(build_superposition_prep(U, V, 0.6, 0.8))
    assert np.allclose(blk[:, 0], [0.98994949, -0.14142136])


def test_superposition_bad_weights():
    with pytest.raises(ContractError):
        build_superposition_prep(matrix_oracle(H, "U"), matrix_oracle(H @ X, "V"), 0.6, 0.6)


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 3))
def test_superposition_properties(seed, n):
    rng = np.random.default_rng(seed)
    psi, phi = random_orthonormal_pair(n, rng)
    U, V = oracles_for(psi, phi, rng)
    ab = rng.normal(size=2) + 1j * rng.normal(size=2)
    a, b = ab / np.linalg.norm(ab)
    circ = build_superposition_prep(U, V, a, b)
    blk, leak = circuit_to_matrix(circ)
    assert abs(np.vdot(a * psi + b * phi, blk[:, 0])) ** 2 >= 1 - 1e-9
    omega = U.matrix.conj().T @ phi
    assert np.abs(blk @ omega - (np.conj(b) * psi - np.conj(a) * phi)).max() <= 1e-8
    assert leak.max() <= 1e-9


# special cases -----------------------------------------------------------------

def test_case_a_example():
    U = matrix_oracle(np.eye(4)[:, [3, 0, 1, 2]], "U")   # |00> -> |11>
    V = matrix_oracle(np.eye(4)[:, [1, 0, 2, 3]], "V")   # |00> -> |01>
    assert detect_special_case(U, V).case == "a"
    blk, leak = circuit_to_matrix(build_exact_merge_special(U, V))
    assert np.allclose(blk[:, 0], np.eye(4)[0b11])
    assert np.allclose(blk[:, 0b10], np.eye(4)[0b01])
    assert leak.max() <= 1e-12


def _instances(rng):
    n = 2
    t = rng.uniform(0, 2 * math.pi)
    c, s = math.cos(t), math.sin(t)
    span = {
        "b": (np.array([c, 0, s, 0], complex), np.array([-s, 0, c, 0], complex)),
    }
    psi = PureState.random(n, rng).amplitudes
    U = unitary_from_column(psi, rng)
    e1, e01 = np.eye(4)[2], np.eye(4)[1]
    span["c-equal"] = (psi, U @ e1)
    span["c-orthogonal"] = (psi, U @ e01)
    span[None] = random_orthonormal_pair(n, rng)
    out = {}
    for case, (p, f) in span.items():
        Uc = U if case in ("c-equal", "c-orthogonal") else unitary_from_column(p, rng)
        out[case] = (matrix_oracle(Uc, "U"), matrix_oracle(unitary_from_column(f, rng), "V"))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_case_detection_and_exactness(seed):
    rng = np.random.default_rng(seed)
    for case, (U, V) in _instances(rng).items():
        assert detect_special_case(U, V).case == case
        circ = build_exact_merge_special(U, V)
        if case is None:
            assert isinstance(circ, NotApplicable) and not circ
            continue
        blk, leak = circuit_to_matrix(circ)
        psi, phi = U.matrix[:, 0], V.matrix[:, 0]
        for col, target in ((0, psi), (2, phi)):
            assert math.sqrt(max(0, 1 - abs(np.vdot(target, blk[:, col])) ** 2)) <= 1e-7
            assert np.abs(blk[:, col] - target).max() <= 1e-8
        assert garbage_sweep(circ, trials=20, seed=seed).max_leakage <= 1e-9


def test_shared_span_construction_fails_outside_its_case():
    rng = np.random.default_rng(1)
    psi, phi = random_orthonormal_pair(2, rng, real=True)
    U, V = oracles_for(psi, phi, rng)
    assert detect_special_case(U, V).case is None
    blk, leak = circuit_to_matrix(shared_span_merge(U, V))
    assert leak.max() > 1e-3 or np.abs(blk[:, 0] - psi).max() > 1e-3


def test_merge_rejects_garbage_u():
    rng = np.random.default_rng(0)
    U = garbage_oracle(unitary_from_column(np.eye(2)[:, 1].astype(complex), rng), 1)
    with pytest.raises(ContractError):
        build_exact_merge_special(U, matrix_oracle(np.eye(2), "V"))
