"""Black-box unitaries with the four-mode access model and query counting."""

from __future__ import annotations

import enum
import json
import threading
from pathlib import Path
from typing import Sequence

import numpy as np

from .batch import BatchState
from .errors import ContractError, NotUnitaryError
from .statevector import (
    H,
    S,
    T,
    X,
    Z,
    PureState,
    is_unitary,
    normalize_controls,
    phase,
    ry,
)

ORACLE_ATOL = 1e-9


class AccessMode(str, enum.Enum):
    APPLY = "apply"
    ADJOINT = "adjoint"
    CONTROLLED_APPLY = "controlled_apply"
    CONTROLLED_ADJOINT = "controlled_adjoint"

    @classmethod
    def of(cls, adjoint: bool, controlled: bool) -> "AccessMode":
        if controlled:
            return cls.CONTROLLED_ADJOINT if adjoint else cls.CONTROLLED_APPLY
        return cls.ADJOINT if adjoint else cls.APPLY

    @property
    def adjoint(self) -> bool:
        return self in (AccessMode.ADJOINT, AccessMode.CONTROLLED_ADJOINT)

    @property
    def controlled(self) -> bool:
        return self in (AccessMode.CONTROLLED_APPLY, AccessMode.CONTROLLED_ADJOINT)


class BlackBoxUnitary:
    """An ``n``-qubit unitary reachable only through :meth:`invoke`.

    The realization is either a ``2**n x 2**n`` matrix (garbage-free) or a
    circuit on ``n + ancillas`` wires that is only promised to be clean on
    ``|0^n>|0^m>``.  Every invocation bumps exactly one access-mode counter.
    """

    def __init__(self, num_qubits: int, matrix=None, circuit=None, ancillas: int = 0,
                 name: str = "U"):
        if (matrix is None) == (circuit is None):
            raise ValueError("give exactly one of matrix or circuit")
        if num_qubits < 1:
            raise ValueError("oracle needs at least one qubit")
        self.num_qubits = int(num_qubits)
        self.name = name
        self.circuit = circuit
        self._lock = threading.Lock()
        self.counts = {m: 0 for m in AccessMode}
        if matrix is not None:
            m = np.asarray(matrix, dtype=np.complex128)
            if m.shape != (2**num_qubits,) * 2:
                raise ValueError(f"matrix shape {m.shape} does not match n={num_qubits}")
            if not is_unitary(m, ORACLE_ATOL):
                raise NotUnitaryError(f"oracle {name} matrix is not unitary")
            self.matrix = m
            self._adj = m.conj().T
            self.ancillas = 0
        else:
            self.matrix = None
            self.ancillas = int(ancillas)
            if circuit.num_qubits != self.num_qubits + self.ancillas:
                raise ValueError("circuit width must be n + ancillas")
            self._inv = circuit.inverse()
            self._check_circuit_unitary()

    @property
    def width(self) -> int:
        return self.num_qubits + self.ancillas

    @property
    def is_matrix(self) -> bool:
        return self.matrix is not None

    def _check_circuit_unitary(self) -> None:
        # circuits that call other oracles are unitary by construction, and
        # checking them would spend uncounted queries
        if self.width > 10 or _inner_oracles(self.circuit):
            return
        cols = np.eye(2**self.width, dtype=np.complex128)
        out = self.circuit.simulate(BatchState.from_columns(cols, self.width, self.width))
        if not is_unitary(out.column_vectors(), ORACLE_ATOL):
            raise NotUnitaryError(f"oracle {self.name} circuit is not unitary")

    def reset_counts(self, recursive: bool = False) -> None:
        with self._lock:
            self.counts = {m: 0 for m in AccessMode}
        if recursive and self.circuit is not None:
            for inner in _inner_oracles(self.circuit):
                inner.reset_counts()

    def total_queries(self) -> int:
        return sum(self.counts.values())

    def counts_dict(self) -> dict[str, int]:
        return {m.value: c for m, c in self.counts.items()}

    def invoke(self, mode: AccessMode, state: BatchState, register: Sequence[int],
               controls=()) -> None:
        """Apply in place to a batch state."""
        mode = AccessMode(mode)
        ctrl = normalize_controls(controls)
        if mode.controlled != bool(ctrl):
            raise ValueError(f"mode {mode.value} and controls {ctrl} disagree")
        register = tuple(int(w) for w in register)
        if len(register) != self.width:
            raise ValueError(f"oracle {self.name} needs {self.width} register wires")
        if set(register) & {w for w, _ in ctrl} or len(set(register)) != len(register):
            raise ValueError("oracle register overlaps its control")
        with self._lock:
            self.counts[mode] += 1
        if self.matrix is not None:
            state.apply(self._adj if mode.adjoint else self.matrix, register, ctrl)
            return
        circ = self._inv if mode.adjoint else self.circuit
        wire_map = dict(enumerate(register))
        for op in circ.ops:
            op = op.remap(wire_map)
            if ctrl:
                op = op.controlled(ctrl)
            op.apply(state)

    def apply_to(self, state: PureState, controls=()) -> PureState:
        ctrl = normalize_controls(controls)
        return invoke(self, AccessMode.of(False, bool(ctrl)), state,
                      control=ctrl if ctrl else None)

    def __repr__(self) -> str:
        kind = "matrix" if self.is_matrix else f"circuit+{self.ancillas}"
        return f"BlackBoxUnitary({self.name!r}, n={self.num_qubits}, {kind})"


def _inner_oracles(circuit) -> list[BlackBoxUnitary]:
    from .circuit import flat_ops

    found = []
    for op in flat_ops(circuit.ops):
        inner = getattr(op, "oracle", None)
        if inner is not None and inner not in found:
            found.append(inner)
            if inner.circuit is not None:
                found.extend(o for o in _inner_oracles(inner.circuit) if o not in found)
    return found


def invoke(oracle: BlackBoxUnitary, mode, state: PureState,
           register: Sequence[int] | None = None, control=None) -> PureState:
    """Return ``state`` with one oracle query applied.

    ``register`` defaults to the lowest ``oracle.width`` wires.  ``control``
    is a wire index (value 1), a ``(wire, value)`` pair or a sequence of pairs.
    """
    mode = AccessMode(mode)
    if register is None:
        register = tuple(range(oracle.width))
    if control is None:
        ctrl = ()
    elif isinstance(control, (int, np.integer)):
        ctrl = ((int(control), 1),)
    elif isinstance(control, tuple) and len(control) == 2 and all(
            isinstance(c, (int, np.integer)) for c in control):
        ctrl = (tuple(int(c) for c in control),)
    else:
        ctrl = control
    ctrl = normalize_controls(ctrl)
    for w in list(register) + [w for w, _ in ctrl]:
        if not 0 <= w < state.num_qubits:
            raise IndexError(f"wire {w} out of range for {state.num_qubits} qubits")
    batch = BatchState.from_pure(state)
    oracle.invoke(mode, batch, register, ctrl)
    return batch.to_pure()


def prepared_state(oracle: BlackBoxUnitary) -> PureState:
    """``U|0^n>``; circuit-form oracles must return their ancillas to ``|0^m>``."""
    batch = BatchState.from_columns(np.eye(2**oracle.num_qubits, 1), oracle.width,
                                    oracle.num_qubits)
    oracle.invoke(AccessMode.APPLY, batch, tuple(range(oracle.width)))
    leak = float(batch.leakage()[0])
    if leak > ORACLE_ATOL:
        raise ContractError(
            f"oracle {oracle.name} leaves ancillas dirty on |0^n> (leakage {leak:.3g})"
        )
    return PureState.from_unnormalized(batch.zero_block()[:, 0], oracle.num_qubits)


# JSON loading --------------------------------------------------------------

_NAMED = {"X": X, "H": H, "Z": Z, "S": S, "T": T,
          "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128)}


def _pair(z) -> complex:
    if isinstance(z, (list, tuple)):
        return complex(float(z[0]), float(z[1]))
    return complex(z)


def _gate_matrix(spec: dict) -> np.ndarray:
    kind = str(spec["gate"])
    if kind.upper() in _NAMED:
        return _NAMED[kind.upper()]
    if kind == "phase":
        return phase(float(spec["angle"]))
    if kind == "ry":
        return ry(float(spec["angle"]))
    if kind in ("U", "unitary", "general"):
        m = np.array([[_pair(z) for z in row] for row in spec["matrix"]], dtype=np.complex128)
        if m.shape != (2, 2):
            raise ValueError("general gate needs a 2x2 matrix")
        return m
    raise ValueError(f"unknown gate {kind!r}")


def oracle_from_dict(data: dict, name: str = "U") -> BlackBoxUnitary:
    """Build an oracle from its JSON description.

    Matrix form: ``{"n": 1, "matrix": [[re, im], ...]}`` flattened row-major
    (nested rows are accepted too).  Circuit form:
    ``{"n": 1, "ancillas": 1, "gates": [{"gate": "H", "target": 0,
    "controls": [1]}, ...]}`` with gates ``X Y Z H S T``, ``phase``/``ry``
    (``angle``) and ``U`` (2x2 ``matrix``); controls are wires (value 1) or
    ``[wire, value]`` pairs.
    """
    from .circuit import Circuit, Gate
    from .statevector import QubitLayout

    n = int(data["n"])
    name = data.get("name", name)
    if "matrix" in data:
        raw = data["matrix"]
        dim = 2**n
        if len(raw) == dim * dim and not (
                isinstance(raw[0], list) and raw[0] and isinstance(raw[0][0], list)):
            m = np.array([_pair(z) for z in raw], dtype=np.complex128).reshape(dim, dim)
        else:
            m = np.array([[_pair(z) for z in row] for row in raw], dtype=np.complex128)
        return BlackBoxUnitary(n, matrix=m, name=name)
    if "gates" in data:
        m = int(data.get("ancillas", 0))
        ops = []
        for g in data["gates"]:
            ctrl = []
            for c in g.get("controls", ()):
                ctrl.append(tuple(c) if isinstance(c, list) else (int(c), 1))
            ops.append(Gate(_gate_matrix(g), int(g["target"]), tuple(ctrl), str(g["gate"])))
        circ = Circuit(n + m, QubitLayout.simple(n, m), tuple(ops), name)
        return BlackBoxUnitary(n, circuit=circ, ancillas=m, name=name)
    raise ValueError("oracle JSON needs either 'matrix' or 'gates'")


def load_oracle(path: str | Path, name: str | None = None) -> BlackBoxUnitary:
    p = Path(path)
    with p.open() as fh:
        data = json.load(fh)
    return oracle_from_dict(data, name or data.get("name") or p.stem)


def oracle_to_dict(oracle: BlackBoxUnitary) -> dict:
    if oracle.matrix is None:
        raise ValueError("only matrix-form oracles serialize to JSON")
    flat = [[float(z.real), float(z.imag)] for z in oracle.matrix.reshape(-1)]
    return {"n": oracle.num_qubits, "name": oracle.name, "matrix": flat}


def matrix_oracle(matrix, name: str = "U") -> BlackBoxUnitary:
    m = np.asarray(matrix, dtype=np.complex128)
    return BlackBoxUnitary(m.shape[0].bit_length() - 1, matrix=m, name=name)
