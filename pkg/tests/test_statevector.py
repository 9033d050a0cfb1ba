import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import gate_matrix
from statemerge.errors import NotUnitaryError
from statemerge.statevector import (
    H,
    X,
    PureState,
    QubitLayout,
    ancilla_leakage,
    apply_controlled,
    apply_gate,
    apply_single_qubit,
    inner_product,
    ry,
    trace_distance,
)

I2 = np.eye(2, dtype=complex)


def plus():
    return PureState(np.array([1, 1]) / math.sqrt(2))


def test_x_flips_zero():
    out = apply_single_qubit(PureState.basis(1, 0), X, 0)
    assert np.allclose(out.amplitudes, [0, 1])


def test_identity_gate_leaves_state():
    s = PureState.random(3, np.random.default_rng(1))
    out = apply_single_qubit(s, I2, 1)
    assert np.allclose(out.amplitudes, s.amplitudes)


def test_hadamard_on_zero():
    out = apply_single_qubit(PureState.basis(1, 0), H, 0)
    assert np.allclose(out.amplitudes, [1 / math.sqrt(2)] * 2)


def test_cnot_fires_on_one():
    # control wire 1 in |1>, target wire 0 in |0>
    out = apply_controlled(PureState.basis(2, 0b10), X, control=1, targets=[0])
    assert np.allclose(out.amplitudes, np.eye(4)[0b11])


def test_control_value_mismatch_is_noop():
    s = PureState.basis(2, 0b00)
    out = apply_controlled(s, X, control=1, control_value=1, targets=[0])
    assert np.allclose(out.amplitudes, s.amplitudes)


def test_bell_preparation():
    s = PureState(np.kron(plus().amplitudes, [1, 0]))  # wire 1 = |+>, wire 0 = |0>
    out = apply_controlled(s, X, control=1, targets=[0])
    assert np.allclose(out.amplitudes, np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_zero_control_value():
    out = apply_controlled(PureState.basis(2, 0), X, control=1, control_value=0, targets=[0])
    assert np.allclose(out.amplitudes, np.eye(4)[1])


def test_inner_product_examples():
    s = PureState.random(2, np.random.default_rng(3))
    assert inner_product(s, s) == pytest.approx(1.0)
    assert inner_product(PureState.basis(1, 0), PureState.basis(1, 1)) == 0
    assert inner_product(PureState.basis(1, 0), plus()) == pytest.approx(0.7071067811865475)


def test_trace_distance_examples():
    s = PureState.random(2, np.random.default_rng(4))
    assert trace_distance(s, s) == pytest.approx(0.0, abs=1e-7)
    assert trace_distance(PureState.basis(1, 0), PureState.basis(1, 1)) == 1.0
    assert trace_distance(PureState.basis(1, 0), plus()) == pytest.approx(0.7071067811865476)


def test_leakage_examples():
    layout = QubitLayout.simple(1, 1)
    assert ancilla_leakage(PureState.basis(2, 0b01), layout) == 0.0
    assert ancilla_leakage(PureState.basis(2, 0b10), layout) == pytest.approx(1.0)
    v = np.zeros(4, dtype=complex)
    v[0b00] = math.sqrt(0.99)
    v[0b11] = math.sqrt(0.01)
    assert ancilla_leakage(PureState(v), layout) == pytest.approx(0.1)


def test_rejects_non_unitary_and_bad_wires():
    s = PureState.basis(2, 0)
    with pytest.raises(NotUnitaryError):
        apply_single_qubit(s, np.array([[1, 1], [0, 1]]), 0)
    with pytest.raises(IndexError):
        apply_single_qubit(s, X, 2)
    with pytest.raises(ValueError):
        apply_gate(s, X, [0], ((0, 1),))
    with pytest.raises(ValueError):
        PureState(np.array([1, 1]))


# properties --------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 4)
angles = st.floats(-math.pi, math.pi, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(seeds, sizes, angles, st.data())
def test_gate_matches_dense_reference(seed, n, theta, data):
    rng = np.random.default_rng(seed)
    s = PureState.random(n, rng)
    target = data.draw(st.integers(0, n - 1))
    others = [w for w in range(n) if w != target]
    ctrl_wires = data.draw(st.lists(st.sampled_from(others), unique=True)) if others else []
    controls = tuple((w, data.draw(st.integers(0, 1))) for w in ctrl_wires)
    g = ry(theta) @ H
    out = apply_gate(s, g, [target], controls)
    ref = gate_matrix(n, g, target, controls) @ s.amplitudes
    assert np.allclose(out.amplitudes, ref, atol=1e-12)
    assert abs(out.norm() - 1) <= 1e-10
    back = apply_gate(out, g.conj().T, [target], controls)
    assert np.linalg.norm(back.amplitudes - s.amplitudes) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(seeds, sizes)
def test_triangle_inequality(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (PureState.random(n, rng) for _ in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9


@settings(max_examples=60, deadline=None)
@given(seeds, sizes)
def test_inner_product_conjugate_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    a, b = PureState.random(n, rng), PureState.random(n, rng)
    assert abs(inner_product(a, b) - np.conj(inner_product(b, a))) <= 1e-12
