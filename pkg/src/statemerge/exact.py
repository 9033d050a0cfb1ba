"""Exact garbage-free constructions built from black-box preparations.

Every builder works on *preparation fragments*: circuits over ``n`` main
wires plus ``m`` fragment ancillas that take ``|0^n>|0^m>`` to some target
state.  Fragments are embedded into a host circuit whose wires are laid out
as ``[main | construction ancillas | shared fragment pool]``.  Fragments
that run one after another share the pool, which only works because each
one hands it back at ``|0^m>`` on the states it is applied to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, OracleCall, Rotation, StateControl, ZeroControl
from .errors import ContractError
from .oracle import BlackBoxUnitary, invoke, prepared_state
from .statevector import X, PureState, QubitLayout, inner_product

ORTH_TOL = 1e-9
CASE_TOL = 1e-9


def first_bit_wire(n: int) -> int:
    """Wire holding the leading bit of ``|10^{n-1}>`` (the most significant one)."""
    return n - 1


def first_bit_index(n: int) -> int:
    return 1 << (n - 1)


# fragments -----------------------------------------------------------------

def oracle_fragment(oracle: BlackBoxUnitary) -> Circuit:
    n, m = oracle.num_qubits, oracle.ancillas
    return Circuit(n + m, QubitLayout.simple(n, m),
                   (OracleCall(oracle, tuple(range(n + m))),), oracle.name)


def identity_fragment(n: int) -> Circuit:
    return Circuit.empty(n, 0, name="I")


def basis_fragment(n: int, index: int) -> Circuit:
    ops = tuple(Gate(X, w, (), "X") for w in range(n) if (index >> w) & 1)
    return Circuit(n, QubitLayout.simple(n), ops, f"|{index:0{n}b}>")


def compose_fragments(*frags: Circuit, name: str | None = None) -> Circuit:
    """Apply ``frags`` left to right on a shared pool of fragment ancillas."""
    n = frags[0].n_main
    m = max(f.num_qubits - f.n_main for f in frags)
    ops = []
    for f in frags:
        if f.n_main != n:
            raise ValueError("fragments act on different main widths")
        ops.extend(_embed(f, n, n, n + m).ops)
    return Circuit(n + m, QubitLayout.simple(n, m), tuple(ops),
                   name or "·".join(f.name for f in reversed(frags)))


def _embed(frag: Circuit, n: int, pool_start: int, total: int) -> Circuit:
    mapping = {j: j for j in range(n)}
    for i in range(frag.num_qubits - n):
        mapping[n + i] = pool_start + i
    return frag.remap(mapping, total, QubitLayout.simple(total))


def _pool_width(*frags: Circuit) -> int:
    return max((f.num_qubits - f.n_main for f in frags), default=0)


class _Builder:
    """Host circuit under construction: main wires, own ancillas, then the pool."""

    def __init__(self, n: int, n_anc: int, pool: int):
        self.n = n
        self.anc = list(range(n, n + n_anc))
        self.pool_start = n + n_anc
        self.total = n + n_anc + pool
        self.ops: list = []

    def frag(self, f: Circuit) -> Circuit:
        return _embed(f, self.n, self.pool_start, self.total)

    def frag_wires(self, f: Circuit) -> tuple[int, ...]:
        return tuple(range(self.n)) + tuple(
            range(self.pool_start, self.pool_start + f.num_qubits - self.n))

    def add(self, circ: Circuit, controls=()) -> None:
        self.ops.extend(circ.controlled(controls).ops if controls else circ.ops)

    def state_control(self, f: Circuit, targets, controls=()) -> None:
        """Flip each target iff the main register holds the state ``f`` prepares."""
        self.ops.append(StateControl(f, self.frag_wires(f), tuple(targets), controls))

    def build(self, name: str, **meta) -> Circuit:
        layout = QubitLayout(tuple(range(self.n)), tuple(range(self.n, self.total)))
        return Circuit(self.total, layout, tuple(self.ops), name, meta)


# zero and state controls ----------------------------------------------------

def build_zero_control(n: int) -> Circuit:
    """``|x>|y> -> |x>|y XOR [x == 0^n]>`` with ``y`` on wire ``n``."""
    if n < 1:
        raise ValueError("register size must be at least 1")
    return Circuit(n + 1, QubitLayout.simple(n, 1),
                   (ZeroControl(tuple(range(n)), n),), "M|0>")


def build_state_control(oracle: BlackBoxUnitary) -> Circuit:
    """Flip the target (last wire) iff the main register is the prepared state.

    Circuit-form oracles bring their ``m`` ancillas along: the test is
    ``U^-1``, all-zeros check over ``n + m`` wires, ``U``.
    """
    n = oracle.num_qubits
    b = _Builder(n, 1, oracle.ancillas)
    # target last so the layout reads main | pool | target
    b.anc, b.pool_start = [n + oracle.ancillas], n
    b.state_control(oracle_fragment(oracle), [n + oracle.ancillas])
    layout = QubitLayout(tuple(range(n)), tuple(range(n, b.total)))
    return Circuit(b.total, layout, tuple(b.ops), f"M|{oracle.name}>")


# swapping orthogonal states -------------------------------------------------

def _check_orthogonal(a: PureState, b: PureState, what: str) -> None:
    ov = abs(inner_product(a, b))
    if ov > ORTH_TOL:
        raise ContractError(f"{what} are not orthogonal (|overlap| = {ov:.3g})")


def _fragment_state(frag: Circuit) -> PureState:
    out = frag.run_main(np.eye(2**frag.n_main, 1))
    return PureState.from_unnormalized(out.zero_block()[:, 0], frag.n_main)


def _swap_ops(b: _Builder, fa: Circuit, fb: Circuit, s: int) -> None:
    """Append the five-step swap of ``fa|0>`` and ``fb|0>`` using ancilla ``s``."""
    ea, eb = b.frag(fa), b.frag(fb)
    w_circ = Circuit(b.total, QubitLayout.simple(b.total), ea.inverse().ops + eb.ops, "W")
    b.state_control(fa, [s])
    b.add(w_circ, ((s, 1),))
    b.state_control(fb, [s])
    b.add(w_circ.inverse(), ((s, 1),))
    b.state_control(fa, [s])


def swap_fragments(fa: Circuit, fb: Circuit, name: str = "swap") -> Circuit:
    """Swap circuit for two preparation fragments; no precondition checks."""
    n = fa.n_main
    b = _Builder(n, 1, _pool_width(fa, fb))
    _swap_ops(b, fa, fb, b.anc[0])
    return b.build(name)


def build_swap_orthogonal(U: BlackBoxUnitary, V: BlackBoxUnitary) -> Circuit:
    """One-ancilla circuit exchanging ``|psi> = U|0>`` and ``|phi> = V|0>``.

    Everything orthogonal to both is left alone and the ancilla returns to
    ``|0>`` on every input.  Costs ten oracle queries.
    """
    if U.num_qubits != V.num_qubits:
        raise ValueError("U and V act on different register sizes")
    _check_orthogonal(prepared_state(U), prepared_state(V), "prepared states")
    return swap_fragments(oracle_fragment(U), oracle_fragment(V),
                          name=f"swap({U.name},{V.name})")


def harden_fragment(frag: Circuit, name: str = "harden") -> Circuit:
    """Swap ``|0^n>`` with the fragment's output; see :func:`harden_clean_preparation`."""
    return swap_fragments(identity_fragment(frag.n_main), frag, name)


def harden_clean_preparation(U: BlackBoxUnitary) -> Circuit:
    """Turn a preparation that is clean only on ``|0^n>|0^m>`` into a clean swap.

    The result lives on ``n + 1 + m`` wires: main, the swap ancilla, then the
    oracle's own ancillas.  It exchanges ``|0^n>`` and ``|psi>``, fixes their
    orthogonal complement, and restores every ancilla on every input.
    """
    psi = prepared_state(U)
    ov = abs(psi.amplitudes[0])
    if ov > ORTH_TOL:
        raise ContractError(f"prepared state overlaps |0^n> (|<0|psi>| = {ov:.3g})")
    return harden_fragment(oracle_fragment(U), name=f"harden({U.name})")


# superposition preparation --------------------------------------------------

def superposition_fragments(fu: Circuit | None, fw: Circuit, alpha: complex, beta: complex,
                            name: str = "prep") -> Circuit:
    """Two-ancilla rotation between ``|0^n>`` and ``|omega> = fw|0^n>``, then ``fu``.

    ``fu`` may be ``None`` for the identity.  Ancilla ``n`` carries the
    rotation, ancilla ``n + 1`` marks the two states the rotation acts on.
    """
    n = fw.n_main
    frags = [fw] + ([fu] if fu is not None else [])
    b = _Builder(n, 2, _pool_width(*frags))
    a1, a2 = b.anc
    w = b.frag(fw)
    zero = identity_fragment(n)
    both = ((a1, 1), (a2, 1))
    b.state_control(zero, [a2])
    b.state_control(fw, [a1, a2])
    b.add(w.inverse(), both)
    b.ops.append(Rotation(alpha, beta, a1, ((a2, 1),)))
    b.add(w, both)
    b.state_control(fw, [a1, a2])
    b.state_control(zero, [a2])
    if fu is not None:
        b.add(b.frag(fu))
    return b.build(name)


def build_superposition_prep(U: BlackBoxUnitary, V: BlackBoxUnitary, alpha: complex,
                             beta: complex) -> Circuit:
    """Circuit taking ``|0^n>`` to ``alpha|psi> + beta|phi>`` with two clean ancillas.

    On ``|omega> = U^-1|phi>`` it yields ``conj(beta)|psi> - conj(alpha)|phi>``
    and on anything orthogonal to both it simply applies ``U``.
    """
    alpha, beta = complex(alpha), complex(beta)
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-10:
        raise ContractError("|alpha|^2 + |beta|^2 must equal 1")
    if not U.is_matrix:
        raise ContractError("U must be garbage-free (matrix form) for superposition prep")
    _check_orthogonal(prepared_state(U), prepared_state(V), "prepared states")
    fu, fv = oracle_fragment(U), oracle_fragment(V)
    fw = compose_fragments(fv, fu.inverse(), name=f"{U.name}^-1 {V.name}")
    return superposition_fragments(fu, fw, alpha, beta, name=f"prep({U.name},{V.name})")


# special-case merges ----------------------------------------------------------

@dataclass(frozen=True)
class NotApplicable:
    """Returned when no exact special case covers the pair."""

    reason: str
    overlap: float = float("nan")

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CaseReport:
    case: str | None
    overlap_omega_e1: float
    psi: PureState
    phi: PureState


def detect_special_case(U: BlackBoxUnitary, V: BlackBoxUnitary, tol: float = CASE_TOL) -> CaseReport:
    """Classify the pair by exact amplitudes.

    Cases: ``"a"`` both targets orthogonal to ``|0^n>`` and ``|10^{n-1}>``;
    ``"b"`` the two spans coincide; ``"c-equal"`` / ``"c-orthogonal"`` when
    ``omega = U^-1|phi>`` is ``|10^{n-1}>`` up to phase or orthogonal to it.
    """
    n = U.num_qubits
    if V.num_qubits != n:
        raise ValueError("U and V act on different register sizes")
    psi, phi = prepared_state(U), prepared_state(V)
    _check_orthogonal(psi, phi, "targets")
    e1 = first_bit_index(n)
    omega = invoke(U, "adjoint", phi.extend(U.ancillas)) if U.ancillas else \
        invoke(U, "adjoint", phi)
    ov = float(abs(omega.amplitudes[e1]))
    p, f = psi.amplitudes, phi.amplitudes
    if n > 1 and max(abs(p[0]), abs(p[e1]), abs(f[0]), abs(f[e1])) <= tol:
        case = "a"
    elif abs(p[0]) ** 2 + abs(p[e1]) ** 2 >= 1 - tol and abs(f[0]) ** 2 + abs(f[e1]) ** 2 >= 1 - tol:
        case = "b"
    elif abs(ov - 1) <= tol:
        case = "c-equal"
    elif ov <= tol:
        case = "c-orthogonal"
    else:
        case = None
    return CaseReport(case, ov, psi, phi)


def _shared_span_builder(U: BlackBoxUnitary, V: BlackBoxUnitary) -> _Builder:
    n = U.num_qubits
    fu, fv = oracle_fragment(U), oracle_fragment(V)
    fe1 = basis_fragment(n, first_bit_index(n))
    b = _Builder(n, 2, _pool_width(fu, fv))
    a1, a2 = b.anc
    v_prime = compose_fragments(fe1, fv, name=f"{V.name}'")
    b.state_control(identity_fragment(n), [a1])
    b.state_control(fe1, [a2])
    b.add(b.frag(fu), ((a1, 1),))
    b.add(b.frag(v_prime), ((a2, 1),))
    b.state_control(fu, [a1])
    b.state_control(fv, [a2])
    return b


def shared_span_merge(U: BlackBoxUnitary, V: BlackBoxUnitary) -> Circuit:
    """Two-ancilla merge that is exact when ``span{psi, phi} = span{|0^n>, |10^{n-1}>}``.

    No precondition check: outside that case the ancillas are left dirty,
    which is what the case detection guards against.
    """
    return _shared_span_builder(U, V).build("merge-shared-span")


def build_exact_merge_special(U: BlackBoxUnitary, V: BlackBoxUnitary):
    """Exact ``|0^n> -> |psi>``, ``|10^{n-1}> -> |phi>`` circuit, or :class:`NotApplicable`."""
    if not U.is_matrix:
        raise ContractError("U must be garbage-free (matrix form) for merging")
    rep = detect_special_case(U, V)
    n = U.num_qubits
    fu, fv = oracle_fragment(U), oracle_fragment(V)
    fe1 = basis_fragment(n, first_bit_index(n))
    if rep.case is None:
        return NotApplicable("|<omega|10..0>| is neither 0 nor 1", rep.overlap_omega_e1)

    if rep.case == "a":
        b = _Builder(n, 1, _pool_width(fu, fv))
        _swap_ops(b, identity_fragment(n), fu, b.anc[0])
        _swap_ops(b, fe1, fv, b.anc[0])
    elif rep.case == "b":
        b = _shared_span_builder(U, V)
    elif rep.case == "c-equal":
        b = _Builder(n, 0, _pool_width(fu))
        b.add(b.frag(fu))
    else:
        fw = compose_fragments(fv, fu.inverse(), name="omega")
        b = _Builder(n, 1, _pool_width(fw, fu))
        _swap_ops(b, fe1, fw, b.anc[0])
        b.add(b.frag(fu))
    return b.build(f"merge-special-{rep.case}", case=rep.case,
                   overlap=rep.overlap_omega_e1)
