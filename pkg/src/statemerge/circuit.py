"""Circuit values: an ordered list of ops over numbered wires.

Circuits are immutable.  Composition helpers (``inverse``, ``controlled``,
``remap``, ``then``) return new circuits, which is how the constructions
embed one fragment inside another.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .batch import PRUNE, BatchState
from .statevector import (
    X,
    Controls,
    PureState,
    QubitLayout,
    is_unitary,
    normalize_controls,
)
from .errors import NotUnitaryError


def _merge_controls(own: Controls, extra: Controls, wires: Iterable[int]) -> Controls:
    merged = normalize_controls(tuple(own) + tuple(extra))
    if {w for w, _ in extra} & set(wires):
        raise ValueError("added control overlaps an operand wire")
    return merged


def _remap_controls(controls: Controls, m: Mapping[int, int]) -> Controls:
    return normalize_controls(tuple((m[w], v) for w, v in controls))


def _complex_pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


@dataclass(frozen=True, eq=False)
class Gate:
    """Single-qubit unitary on ``target``, optionally controlled."""

    matrix: np.ndarray
    target: int
    controls: Controls = ()
    label: str = "U"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (2, 2) or not is_unitary(m):
            raise NotUnitaryError(f"gate {self.label} is not a 2x2 unitary")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "controls", normalize_controls(self.controls))
        if self.target in {w for w, _ in self.controls}:
            raise ValueError("gate target is also a control")

    def wires(self) -> tuple[int, ...]:
        return (self.target,) + tuple(w for w, _ in self.controls)

    def apply(self, state: BatchState) -> None:
        state.apply(self.matrix, [self.target], self.controls)

    def inverse(self) -> "Gate":
        lab = self.label[:-1] if self.label.endswith("†") else self.label + "†"
        return replace(self, matrix=self.matrix.conj().T, label=lab)

    def controlled(self, extra: Controls) -> "Gate":
        return replace(self, controls=_merge_controls(self.controls, extra, [self.target]))

    def remap(self, m: Mapping[int, int]) -> "Gate":
        return replace(self, target=m[self.target], controls=_remap_controls(self.controls, m))

    def to_dict(self) -> dict:
        return {
            "type": "gate",
            "label": self.label,
            "target": self.target,
            "controls": [list(c) for c in self.controls],
            "matrix": [[_complex_pair(z) for z in row] for row in self.matrix],
        }


@dataclass(frozen=True, eq=False)
class ZeroControl:
    """Flip ``target`` iff every wire of ``register`` is 0 (the all-zeros test)."""

    register: tuple[int, ...]
    target: int
    controls: Controls = ()

    def __post_init__(self):
        reg = tuple(int(w) for w in self.register)
        if not reg:
            raise ValueError("zero_control needs a non-empty register")
        object.__setattr__(self, "register", reg)
        object.__setattr__(self, "controls", normalize_controls(self.controls))
        touched = list(reg) + [self.target] + [w for w, _ in self.controls]
        if len(set(touched)) != len(touched):
            raise ValueError("zero_control wires overlap")

    def wires(self) -> tuple[int, ...]:
        return self.register + (self.target,) + tuple(w for w, _ in self.controls)

    def apply(self, state: BatchState) -> None:
        ctrl = normalize_controls(self.controls + tuple((w, 0) for w in self.register))
        state.apply(X, [self.target], ctrl)

    def inverse(self) -> "ZeroControl":
        return self

    def controlled(self, extra: Controls) -> "ZeroControl":
        return replace(
            self,
            controls=_merge_controls(self.controls, extra, self.register + (self.target,)),
        )

    def remap(self, m: Mapping[int, int]) -> "ZeroControl":
        return replace(
            self,
            register=tuple(m[w] for w in self.register),
            target=m[self.target],
            controls=_remap_controls(self.controls, m),
        )

    def to_dict(self) -> dict:
        return {
            "type": "zero_control",
            "register": list(self.register),
            "target": self.target,
            "controls": [list(c) for c in self.controls],
        }


@dataclass(frozen=True, eq=False)
class Rotation:
    """``R = [[a, conj(b)], [b, -conj(a)]]`` with ``R|0> = a|0> + b|1>``."""

    alpha: complex
    beta: complex
    target: int
    controls: Controls = ()
    dagger: bool = False

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-10:
            raise ValueError("rotation requires |alpha|^2 + |beta|^2 = 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "controls", normalize_controls(self.controls))

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        m = np.array([[a, np.conj(b)], [b, -np.conj(a)]], dtype=np.complex128)
        return m.conj().T if self.dagger else m

    def wires(self) -> tuple[int, ...]:
        return (self.target,) + tuple(w for w, _ in self.controls)

    def apply(self, state: BatchState) -> None:
        state.apply(self.matrix, [self.target], self.controls)

    def inverse(self) -> "Rotation":
        return replace(self, dagger=not self.dagger)

    def controlled(self, extra: Controls) -> "Rotation":
        return replace(self, controls=_merge_controls(self.controls, extra, [self.target]))

    def remap(self, m: Mapping[int, int]) -> "Rotation":
        return replace(self, target=m[self.target], controls=_remap_controls(self.controls, m))

    def to_dict(self) -> dict:
        return {
            "type": "rotation",
            "alpha": _complex_pair(self.alpha),
            "beta": _complex_pair(self.beta),
            "target": self.target,
            "controls": [list(c) for c in self.controls],
            "dagger": self.dagger,
        }


@dataclass(frozen=True, eq=False)
class OracleCall:
    """One black-box query; the access mode follows from ``adjoint`` and ``controls``."""

    oracle: object
    register: tuple[int, ...]
    adjoint: bool = False
    controls: Controls = ()

    def __post_init__(self):
        reg = tuple(int(w) for w in self.register)
        object.__setattr__(self, "register", reg)
        object.__setattr__(self, "controls", normalize_controls(self.controls))
        if len(reg) != self.oracle.width:
            raise ValueError(
                f"oracle {self.oracle.name} needs {self.oracle.width} wires, got {len(reg)}"
            )
        touched = list(reg) + [w for w, _ in self.controls]
        if len(set(touched)) != len(touched):
            raise ValueError("oracle register overlaps its controls")

    @property
    def mode(self):
        from .oracle import AccessMode

        return AccessMode.of(self.adjoint, bool(self.controls))

    def wires(self) -> tuple[int, ...]:
        return self.register + tuple(w for w, _ in self.controls)

    def apply(self, state: BatchState) -> None:
        self.oracle.invoke(self.mode, state, self.register, self.controls)

    def inverse(self) -> "OracleCall":
        return replace(self, adjoint=not self.adjoint)

    def controlled(self, extra: Controls) -> "OracleCall":
        return replace(self, controls=_merge_controls(self.controls, extra, self.register))

    def remap(self, m: Mapping[int, int]) -> "OracleCall":
        return replace(
            self,
            register=tuple(m[w] for w in self.register),
            controls=_remap_controls(self.controls, m),
        )

    def to_dict(self) -> dict:
        return {
            "type": "oracle_call",
            "oracle": self.oracle.name,
            "mode": self.mode.value,
            "register": list(self.register),
            "controls": [list(c) for c in self.controls],
        }


@dataclass(frozen=True, eq=False)
class StateControl:
    """Flip every target iff ``register`` holds ``fragment|0>``.

    The unitary is ``F^-1``, an all-zeros test on the register, then ``F``
    (each controlled when the op is), which is also what :meth:`expand`
    returns and what query counts and JSON use.  Simulation normally takes
    the equivalent rank-one form ``I + (X_targets - I) (x) |F0><F0|``: it
    never materialises ``F^-1`` applied to a generic state, which for the
    zero-chain fragments spreads over exponentially many flag patterns
    before ``F`` folds it back.
    """

    fragment: "Circuit"
    register: tuple[int, ...]
    targets: tuple[int, ...]
    controls: Controls = ()

    def __post_init__(self):
        reg = tuple(int(w) for w in self.register)
        tg = tuple(int(w) for w in self.targets)
        object.__setattr__(self, "register", reg)
        object.__setattr__(self, "targets", tg)
        object.__setattr__(self, "controls", normalize_controls(self.controls))
        if len(reg) != self.fragment.num_qubits:
            raise ValueError("state control register must match the fragment width")
        if not tg:
            raise ValueError("state control needs at least one target")
        touched = list(reg) + list(tg) + [w for w, _ in self.controls]
        if len(set(touched)) != len(touched):
            raise ValueError("state control wires overlap")

    def wires(self) -> tuple[int, ...]:
        return self.register + self.targets + tuple(w for w, _ in self.controls)

    def expand(self) -> list:
        m = dict(enumerate(self.register))
        emb = [op.remap(m) for op in self.fragment.ops]
        if self.controls:
            emb = [op.controlled(self.controls) for op in emb]
        inv = [op.inverse() for op in reversed(emb)]
        tests = [ZeroControl(self.register, t, self.controls) for t in self.targets]
        return inv + tests + emb

    def apply(self, state: BatchState) -> None:
        d = state.dense
        n = self.fragment.n_main
        if (state.expand_state_controls or d != n
                or self.register[:n] != tuple(range(n))
                or self.fragment.layout.main != tuple(range(n))):
            for op in self.expand():
                op.apply(state)
            return
        prepared = self.fragment.run_main(np.eye(2**n, 1), prune=state.prune)
        vecs = []
        for fkey, blk in prepared.blocks.items():
            gkey = 0
            j = 0
            while fkey >> j:
                if (fkey >> j) & 1:
                    gkey |= 1 << (self.register[n + j] - d)
                j += 1
            vecs.append((gkey, blk[:, 0]))
        rmask = sum(1 << (w - d) for w in self.register[n:])
        tmask = sum(1 << (w - d) for w in self.targets)
        cmask = sum(1 << (w - d) for w, _ in self.controls)
        cval = sum(v << (w - d) for w, v in self.controls)
        lookup = dict(vecs)
        overlaps: dict[int, np.ndarray] = {}
        for key, blk in state.blocks.items():
            rest = key & ~rmask
            if rest & cmask != cval:
                continue
            v = lookup.get(key & rmask)
            if v is None:
                continue
            o = np.conj(v) @ blk
            if rest in overlaps:
                overlaps[rest] = overlaps[rest] + o
            else:
                overlaps[rest] = o
        touched = set()
        rows = 2**d
        for rest, o in overlaps.items():
            for gkey, v in vecs:
                term = np.outer(v, o)
                for key, sign in ((gkey | (rest ^ tmask), 1.0), (gkey | rest, -1.0)):
                    blk = state.blocks.get(key)
                    if blk is None:
                        blk = np.zeros((rows, o.shape[0]), dtype=np.complex128)
                        state.blocks[key] = blk
                    blk += sign * term
                    touched.add(key)
        for key in touched:
            state.prune_block(key)
        state.end_op()

    def inverse(self) -> "StateControl":
        return self

    def controlled(self, extra: Controls) -> "StateControl":
        return replace(self, controls=_merge_controls(self.controls, extra,
                                                      self.register + self.targets))

    def remap(self, m: Mapping[int, int]) -> "StateControl":
        return replace(
            self,
            register=tuple(m[w] for w in self.register),
            targets=tuple(m[w] for w in self.targets),
            controls=_remap_controls(self.controls, m),
        )

    def to_dict(self) -> dict:
        return {
            "type": "state_control",
            "register": list(self.register),
            "targets": list(self.targets),
            "controls": [list(c) for c in self.controls],
            "fragment": self.fragment.to_dict(),
        }


Op = Gate | ZeroControl | Rotation | OracleCall | StateControl


@dataclass(frozen=True, eq=False)
class Circuit:
    num_qubits: int
    layout: QubitLayout
    ops: tuple = ()
    name: str = "circuit"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        self.layout.validate(self.num_qubits)
        for op in self.ops:
            for w in op.wires():
                if not 0 <= w < self.num_qubits:
                    raise ValueError(f"op wire {w} outside circuit of {self.num_qubits} qubits")

    @classmethod
    def empty(cls, n_main: int, n_ancilla: int = 0, name: str = "empty") -> "Circuit":
        return cls(n_main + n_ancilla, QubitLayout.simple(n_main, n_ancilla), (), name)

    @property
    def n_main(self) -> int:
        return len(self.layout.main)

    def __len__(self) -> int:
        return len(self.ops)

    def inverse(self) -> "Circuit":
        return replace(self, ops=tuple(op.inverse() for op in reversed(self.ops)),
                       name=self.name + "†")

    def controlled(self, controls, layout: QubitLayout | None = None,
                   num_qubits: int | None = None) -> "Circuit":
        """Control every op; control wires must already exist (or pass a wider layout)."""
        ctrl = normalize_controls(controls)
        return Circuit(
            num_qubits or self.num_qubits,
            layout or self.layout,
            tuple(op.controlled(ctrl) for op in self.ops),
            "c-" + self.name,
            dict(self.meta),
        )

    def remap(self, mapping: Mapping[int, int] | Sequence[int], num_qubits: int,
              layout: QubitLayout) -> "Circuit":
        m = dict(enumerate(mapping)) if not isinstance(mapping, Mapping) else dict(mapping)
        return Circuit(num_qubits, layout, tuple(op.remap(m) for op in self.ops),
                       self.name, dict(self.meta))

    def then(self, *others: "Circuit", name: str | None = None) -> "Circuit":
        ops = list(self.ops)
        for o in others:
            if o.num_qubits != self.num_qubits:
                raise ValueError("cannot concatenate circuits of different widths")
            ops.extend(o.ops)
        return replace(self, ops=tuple(ops), name=name or self.name)

    def simulate(self, state: BatchState) -> BatchState:
        """Run in place on a batch state and return it."""
        if state.num_qubits != self.num_qubits:
            raise ValueError(
                f"state has {state.num_qubits} qubits, circuit needs {self.num_qubits}"
            )
        for op in self.ops:
            op.apply(state)
        return state

    def run(self, state: PureState) -> PureState:
        """Simulate on a full-width pure state."""
        if state.num_qubits != self.num_qubits:
            raise ValueError(
                f"state has {state.num_qubits} qubits, circuit needs {self.num_qubits}"
            )
        batch = self.simulate(BatchState.from_pure(state))
        return batch.to_pure()

    def run_main(self, main_columns: np.ndarray, dense: int | None = None,
                 prune: float = PRUNE, expand: bool = False) -> BatchState:
        """Push main-register inputs (ancillas at 0) through the circuit.

        Main wires must be ``0..n_main-1``.  Only those wires are held densely
        unless ``dense`` asks for more.  ``prune`` is the per-column norm below
        which an ancilla configuration is dropped (see ``BatchState``);
        ``expand`` runs state controls gate by gate.
        """
        n = self.n_main
        if self.layout.main != tuple(range(n)):
            raise ValueError("run_main expects the main register on the lowest wires")
        dense = dense or n
        cols = np.asarray(main_columns, dtype=np.complex128)
        if cols.ndim == 1:
            cols = cols.reshape(-1, 1)
        if dense > n:
            full = np.zeros((2**dense, cols.shape[1]), dtype=np.complex128)
            full[: 2**n] = cols
            cols = full
        batch = BatchState.from_columns(cols, self.num_qubits, dense, prune)
        batch.expand_state_controls = expand
        return self.simulate(batch)

    def apply_to(self, state: PureState, controls=()) -> PureState:
        circ = self.controlled(controls) if controls else self
        return circ.run(state)

    def query_counts(self) -> dict[str, dict[str, int]]:
        """Static count of oracle invocations per oracle name and access mode.

        Calls made by circuit-form oracles are expanded, so composite
        oracles report both their own calls and the calls they make.
        """
        counter: Counter = Counter()
        for op in flat_ops(self.ops):
            if isinstance(op, OracleCall):
                _expand_counts(op.oracle, op.adjoint, bool(op.controls), counter)
        out: dict[str, dict[str, int]] = {}
        for (name, mode), c in sorted(counter.items()):
            out.setdefault(name, {})[mode] = c
        return out

    def total_queries(self, names: Iterable[str] | None = None) -> int:
        counts = self.query_counts()
        keys = counts.keys() if names is None else names
        return sum(sum(counts.get(k, {}).values()) for k in keys)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "num_qubits": self.num_qubits,
            "layout": self.layout.to_dict(),
            "meta": self.meta,
            "ops": [op.to_dict() for op in self.ops],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def flat_ops(ops: Iterable) -> Iterable:
    """Ops with every :class:`StateControl` replaced by its gate-level expansion."""
    for op in ops:
        if isinstance(op, StateControl):
            yield from flat_ops(op.expand())
        else:
            yield op


def _expand_counts(oracle, adjoint: bool, controlled: bool, counter: Counter) -> None:
    from .oracle import AccessMode

    counter[(oracle.name, AccessMode.of(adjoint, controlled).value)] += 1
    if oracle.circuit is not None:
        for op in flat_ops(oracle.circuit.ops):
            if isinstance(op, OracleCall):
                _expand_counts(op.oracle, adjoint ^ op.adjoint,
                               controlled or bool(op.controls), counter)


def circuit_from_dict(data: dict, oracles: Mapping[str, object] | None = None) -> Circuit:
    """Rebuild a circuit from :meth:`Circuit.to_dict` output.

    Oracle calls are resolved by name through ``oracles``.
    """
    if data.get("version") != 1:
        raise ValueError(f"unsupported circuit JSON version {data.get('version')!r}")
    lay = data["layout"]
    layout = QubitLayout(lay["main"], lay.get("ancillas", ()), lay.get("controls", ()))
    ops = []
    for d in data["ops"]:
        if d["type"] == "state_control":
            frag = circuit_from_dict(d["fragment"], oracles)
            ops.append(StateControl(frag, tuple(d["register"]), tuple(d["targets"]),
                                    tuple(tuple(c) for c in d.get("controls", ()))))
            continue
        ctrl = tuple(tuple(c) for c in d.get("controls", ()))
        kind = d["type"]
        if kind == "gate":
            m = np.array([[complex(*z) for z in row] for row in d["matrix"]])
            ops.append(Gate(m, d["target"], ctrl, d.get("label", "U")))
        elif kind == "zero_control":
            ops.append(ZeroControl(tuple(d["register"]), d["target"], ctrl))
        elif kind == "rotation":
            ops.append(Rotation(complex(*d["alpha"]), complex(*d["beta"]), d["target"],
                                ctrl, d.get("dagger", False)))
        elif kind == "oracle_call":
            if not oracles or d["oracle"] not in oracles:
                raise KeyError(f"unknown oracle {d['oracle']!r}")
            adjoint = d["mode"] in ("adjoint", "controlled_adjoint")
            ops.append(OracleCall(oracles[d["oracle"]], tuple(d["register"]), adjoint, ctrl))
        else:
            raise ValueError(f"unknown op type {kind!r}")
    return Circuit(data["num_qubits"], layout, tuple(ops), data.get("name", "circuit"),
                   data.get("meta", {}))
