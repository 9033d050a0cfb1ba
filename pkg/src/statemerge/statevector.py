"""Dense pure-state simulation.

Qubit ordering is little-endian: wire ``q`` is bit ``q`` of the amplitude
index, so ``|x_{n-1} ... x_1 x_0>`` lives at index ``sum(x_q << q)``.  Ket
strings in docstrings and tests are written most-significant wire first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-10
UNITARY_ATOL = 1e-10

Controls = tuple[tuple[int, int], ...]


def is_unitary(matrix: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol))


def normalize_controls(controls) -> Controls:
    """Accept ``[w, ...]`` (value 1) or ``[(w, v), ...]`` and return sorted pairs."""
    out = []
    for c in controls or ():
        if isinstance(c, (tuple, list)):
            w, v = int(c[0]), int(c[1])
        else:
            w, v = int(c), 1
        if v not in (0, 1):
            raise ValueError(f"control value must be 0 or 1, got {v}")
        out.append((w, v))
    wires = [w for w, _ in out]
    if len(set(wires)) != len(wires):
        raise ValueError(f"duplicate control wires {wires}")
    return tuple(sorted(out))


def apply_dense(
    amps: np.ndarray,
    num_qubits: int,
    gate: np.ndarray,
    targets: Sequence[int],
    controls: Controls = (),
) -> None:
    """Apply ``gate`` in place to a ``(2**num_qubits, ncols)`` amplitude block.

    Bit ``j`` of the gate's row/column index corresponds to ``targets[j]``.
    Controls restrict the action to the slice where each control wire holds
    its value; nothing outside that slice is touched.
    """
    ncols = amps.shape[1]
    t = amps.reshape((2,) * num_qubits + (ncols,))
    idx: list = [slice(None)] * (num_qubits + 1)
    for w, v in controls:
        idx[num_qubits - 1 - w] = v
    sub = t[tuple(idx)]
    # axes of sub that survive the control slicing, by wire
    remaining = [w for w in range(num_qubits - 1, -1, -1) if w not in dict(controls)]
    pos = {w: i for i, w in enumerate(remaining)}
    k = len(targets)
    src = [pos[w] for w in reversed(targets)]
    moved = np.moveaxis(sub, src, list(range(k)))
    shape = moved.shape
    flat = moved.reshape(2**k, -1)
    res = (gate @ flat).reshape(shape)
    sub[...] = np.moveaxis(res, list(range(k)), src)


@dataclass(frozen=True)
class QubitLayout:
    """Partition of circuit wires into data, ancilla and control roles."""

    main: tuple[int, ...]
    ancillas: tuple[int, ...] = ()
    controls: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "main", tuple(int(w) for w in self.main))
        object.__setattr__(self, "ancillas", tuple(int(w) for w in self.ancillas))
        object.__setattr__(self, "controls", tuple(int(w) for w in self.controls))
        allw = self.main + self.ancillas + self.controls
        if len(set(allw)) != len(allw):
            raise ValueError("layout ranges overlap")

    @property
    def num_qubits(self) -> int:
        return len(self.main) + len(self.ancillas) + len(self.controls)

    def validate(self, num_qubits: int) -> None:
        allw = sorted(self.main + self.ancillas + self.controls)
        if allw != list(range(num_qubits)):
            raise ValueError(
                f"layout does not cover wires 0..{num_qubits - 1} exactly once"
            )

    @classmethod
    def simple(cls, n_main: int, n_ancilla: int = 0) -> "QubitLayout":
        return cls(tuple(range(n_main)), tuple(range(n_main, n_main + n_ancilla)))

    def to_dict(self) -> dict:
        return {
            "main": list(self.main),
            "ancillas": list(self.ancillas),
            "controls": list(self.controls),
        }


class PureState:
    """Normalized amplitude vector over ``num_qubits`` wires."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes, num_qubits: int | None = None, *, check: bool = True):
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        dim = amps.shape[0]
        if num_qubits is None:
            num_qubits = dim.bit_length() - 1
        if num_qubits < 1 or dim != 2**num_qubits:
            raise ValueError(f"amplitude length {dim} is not 2**{num_qubits}")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > ATOL:
                raise ValueError(f"state is not normalized (norm={norm!r})")
        self.num_qubits = int(num_qubits)
        self.amplitudes = amps

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "PureState":
        if not 0 <= index < 2**num_qubits:
            raise IndexError(f"basis index {index} out of range")
        amps = np.zeros(2**num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, num_qubits)

    @classmethod
    def from_unnormalized(cls, vector, num_qubits: int | None = None) -> "PureState":
        v = np.asarray(vector, dtype=np.complex128)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / norm, num_qubits)

    @classmethod
    def random(cls, num_qubits: int, rng: np.random.Generator, real: bool = False) -> "PureState":
        dim = 2**num_qubits
        v = rng.normal(size=dim)
        if not real:
            v = v + 1j * rng.normal(size=dim)
        return cls.from_unnormalized(v, num_qubits)

    def tensor(self, other: "PureState") -> "PureState":
        """``self`` on the low wires, ``other`` on the wires above them."""
        amps = np.kron(other.amplitudes, self.amplitudes)
        return PureState(amps, self.num_qubits + other.num_qubits, check=False)

    def extend(self, extra_qubits: int) -> "PureState":
        """Append ``extra_qubits`` wires in ``|0>`` above the existing ones."""
        if extra_qubits == 0:
            return self
        return self.tensor(PureState.basis(extra_qubits, 0))

    def copy(self) -> "PureState":
        return PureState(self.amplitudes.copy(), self.num_qubits, check=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self.num_qubits})"


def _check_wire(state: PureState, w: int) -> None:
    if not 0 <= w < state.num_qubits:
        raise IndexError(f"wire {w} out of range for {state.num_qubits} qubits")


def apply_gate(
    state: PureState,
    gate: np.ndarray,
    targets: Sequence[int],
    controls=(),
    *,
    check_unitary: bool = True,
) -> PureState:
    """Return a new state with a (multi-)controlled gate applied."""
    gate = np.asarray(gate, dtype=np.complex128)
    targets = [int(t) for t in targets]
    ctrl = normalize_controls(controls)
    if gate.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"gate shape {gate.shape} does not match {len(targets)} targets")
    if check_unitary and not is_unitary(gate):
        from .errors import NotUnitaryError

        raise NotUnitaryError("gate is not unitary within tolerance")
    for w in targets:
        _check_wire(state, w)
    for w, _ in ctrl:
        _check_wire(state, w)
    if len(set(targets)) != len(targets) or set(targets) & {w for w, _ in ctrl}:
        raise ValueError("control and target wires overlap")
    out = state.amplitudes.copy().reshape(-1, 1)
    apply_dense(out, state.num_qubits, gate, targets, ctrl)
    return PureState(out.reshape(-1), state.num_qubits, check=False)


def apply_single_qubit(state: PureState, gate: np.ndarray, target: int) -> PureState:
    return apply_gate(state, gate, [target])


def apply_controlled(
    state: PureState,
    operand,
    control: int,
    control_value: int = 1,
    targets: Sequence[int] | None = None,
) -> PureState:
    """Apply ``operand`` on the subspace where ``control`` equals ``control_value``.

    ``operand`` is either a unitary matrix acting on ``targets`` or any object
    with an ``apply_to(state, controls)`` method (circuits, oracles).
    """
    ctrl = ((int(control), int(control_value)),)
    if hasattr(operand, "apply_to"):
        return operand.apply_to(state, ctrl)
    if targets is None:
        raise ValueError("targets are required when the operand is a matrix")
    return apply_gate(state, operand, targets, ctrl)


def inner_product(a: PureState, b: PureState) -> complex:
    """``<a|b>``."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"size mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: PureState, b: PureState) -> float:
    return abs(inner_product(a, b)) ** 2


def trace_distance(a: PureState, b: PureState) -> float:
    """Trace distance between pure states, ``sqrt(1 - |<a|b>|^2)``.

    Evaluated as the norm of the part of ``b`` orthogonal to ``a``, which is
    the same number without the cancellation near 0.
    """
    ov = inner_product(a, b)
    return float(min(1.0, np.linalg.norm(b.amplitudes - ov * a.amplitudes)))


def ancilla_mask(num_qubits: int, wires: Iterable[int]) -> np.ndarray:
    """Boolean mask over basis indices where any of ``wires`` is 1."""
    idx = np.arange(2**num_qubits)
    mask = np.zeros(idx.shape, dtype=bool)
    for w in wires:
        mask |= ((idx >> w) & 1).astype(bool)
    return mask


def ancilla_leakage(state: PureState, layout: QubitLayout) -> float:
    """L2 norm of the amplitude on configurations with any ancilla set."""
    layout.validate(state.num_qubits)
    mask = ancilla_mask(state.num_qubits, layout.ancillas)
    return float(np.linalg.norm(state.amplitudes[mask]))


def restrict_to_main(state: PureState, layout: QubitLayout) -> np.ndarray:
    """Amplitudes on the main register with ancillas and controls at 0 (unnormalized)."""
    layout.validate(state.num_qubits)
    idx = np.arange(2 ** len(layout.main))
    full = np.zeros_like(idx)
    for j, w in enumerate(layout.main):
        full |= ((idx >> j) & 1) << w
    return state.amplitudes[full]


I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
T = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128)


def phase(angle: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * angle)]], dtype=np.complex128)


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)
