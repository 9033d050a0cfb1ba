"""Batched simulation with a dense low register and sparse high wires.

Circuits built by the general merge carry hundreds of ancillas but only a
handful of ancilla configurations are ever populated.  A ``BatchState`` keeps
one dense ``(2**dense, ncols)`` block per populated configuration of the wires
above ``dense``; each column is an independent input pushed through the same
circuit, so a whole basis (or a set of random inputs) runs in one pass.

Blocks whose column norms all fall to ``prune`` or below are dropped.  The
pieces dropped by one op are orthogonal, so they combine in quadrature; the
per-op amounts then add up in ``truncation``.  Every op is unitary, so that
sum bounds the per-column 2-norm distance between the simulated and the
exact final state.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .statevector import Controls, PureState, apply_dense

PRUNE = 1e-14


class BatchState:
    def __init__(self, num_qubits: int, dense: int, blocks: dict[int, np.ndarray],
                 prune: float = PRUNE):
        if not 0 < dense <= num_qubits:
            raise ValueError(f"dense width {dense} invalid for {num_qubits} qubits")
        self.num_qubits = num_qubits
        self.dense = dense
        self.blocks = blocks
        self.prune = prune
        self.truncation = np.zeros(self.ncols)
        self.expand_state_controls = False
        self._dropped = None

    @classmethod
    def from_columns(cls, columns: np.ndarray, num_qubits: int, dense: int,
                     prune: float = PRUNE) -> "BatchState":
        """Columns are amplitude vectors over the dense wires; all higher wires start at 0."""
        cols = np.asarray(columns, dtype=np.complex128)
        if cols.ndim == 1:
            cols = cols.reshape(-1, 1)
        if cols.shape[0] != 2**dense:
            raise ValueError(f"columns have {cols.shape[0]} rows, expected {2**dense}")
        return cls(num_qubits, dense, {0: cols.copy()}, prune)

    @classmethod
    def from_pure(cls, state: PureState) -> "BatchState":
        return cls.from_columns(state.amplitudes, state.num_qubits, state.num_qubits)

    @property
    def ncols(self) -> int:
        return next(iter(self.blocks.values())).shape[1] if self.blocks else 0

    def copy(self) -> "BatchState":
        out = BatchState(self.num_qubits, self.dense,
                         {k: b.copy() for k, b in self.blocks.items()}, self.prune)
        out.truncation = self.truncation.copy()
        out.expand_state_controls = self.expand_state_controls
        return out

    def prune_block(self, key: int) -> None:
        """Drop ``key`` if it is negligible; call :meth:`end_op` once the op is done."""
        blk = self.blocks.get(key)
        if blk is None:
            return
        sq = (np.einsum("ij,ij->j", blk.real, blk.real)
              + np.einsum("ij,ij->j", blk.imag, blk.imag))
        if sq.max() <= self.prune**2:
            self._dropped = sq if self._dropped is None else self._dropped + sq
            del self.blocks[key]

    def end_op(self) -> None:
        if self._dropped is not None:
            self.truncation = self.truncation + np.sqrt(self._dropped)
            self._dropped = None

    def apply(self, gate: np.ndarray, targets: Sequence[int], controls: Controls = ()) -> None:
        d = self.dense
        for w in list(targets) + [w for w, _ in controls]:
            if not 0 <= w < self.num_qubits:
                raise IndexError(f"wire {w} out of range for {self.num_qubits} qubits")
        sparse_t = [w for w in targets if w >= d]
        dense_c = tuple((w, v) for w, v in controls if w < d)
        cmask = cval = 0
        for w, v in controls:
            if w >= d:
                cmask |= 1 << (w - d)
                cval |= v << (w - d)
        rows = 2**d
        ncols = self.ncols

        if not sparse_t:
            keys = [k for k in self.blocks if k & cmask == cval]
            if not keys:
                return
            # all selected blocks side by side, one kernel call
            stack = np.concatenate([self.blocks[k] for k in keys], axis=1)
            apply_dense(stack, d, gate, targets, dense_c)
            for i, k in enumerate(keys):
                self.blocks[k] = stack[:, i * ncols:(i + 1) * ncols]
            return

        # Gather every sparse-target configuration sharing the other key bits
        # into one tensor with the sparse targets as the top wires.
        shifts = [w - d for w in sparse_t]
        tmask = sum(1 << s for s in shifts)
        nt = len(shifts)
        local = {w: d + j for j, w in enumerate(sparse_t)}
        mapped = [local.get(w, w) for w in targets]
        bases = list(dict.fromkeys(k & ~tmask for k in self.blocks if k & cmask == cval))
        if not bases:
            return
        offsets = []
        for sub in range(2**nt):
            off = 0
            for j, s in enumerate(shifts):
                if (sub >> j) & 1:
                    off |= 1 << s
            offsets.append(off)
        nb, ns = len(bases), len(offsets)
        arr = np.zeros((ns, rows, nb, ncols), dtype=np.complex128)
        for b, base in enumerate(bases):
            for sub, off in enumerate(offsets):
                blk = self.blocks.get(base | off)
                if blk is not None:
                    arr[sub, :, b, :] = blk
        flat = arr.reshape(ns * rows, nb * ncols)
        apply_dense(flat, d + nt, gate, mapped, dense_c)
        sq = np.einsum("srbc,srbc->sbc", arr.real, arr.real) \
            + np.einsum("srbc,srbc->sbc", arr.imag, arr.imag)
        keep = sq.max(axis=2) > self.prune**2
        dropped = np.where(keep[:, :, None], 0.0, sq).sum(axis=(0, 1))
        for b, base in enumerate(bases):
            for sub, off in enumerate(offsets):
                if keep[sub, b]:
                    self.blocks[base | off] = arr[sub, :, b, :]
                else:
                    self.blocks.pop(base | off, None)
        if not keep.all():
            self.truncation = self.truncation + np.sqrt(dropped)

    def column_vectors(self) -> np.ndarray:
        """Full dense amplitude matrix ``(2**num_qubits, ncols)``; small circuits only."""
        out = np.zeros((2**self.num_qubits, self.ncols), dtype=np.complex128)
        rows = 2**self.dense
        for key, blk in self.blocks.items():
            out[key * rows:(key + 1) * rows] = blk
        return out

    def zero_block(self) -> np.ndarray:
        """Dense-register amplitudes with every sparse wire at 0."""
        blk = self.blocks.get(0)
        if blk is None:
            return np.zeros((2**self.dense, self.ncols), dtype=np.complex128)
        return blk.copy()

    def leakage(self, dense_ancillas: Sequence[int] = ()) -> np.ndarray:
        """Per-column norm of amplitude outside the all-ancillas-zero subspace.

        Every sparse wire counts as an ancilla; ``dense_ancillas`` names any
        extra ancilla wires that sit inside the dense register.
        """
        sq = np.zeros(self.ncols)
        mask = None
        if dense_ancillas:
            idx = np.arange(2**self.dense)
            mask = np.zeros(idx.shape, dtype=bool)
            for w in dense_ancillas:
                mask |= ((idx >> w) & 1).astype(bool)
        for key, blk in self.blocks.items():
            if key != 0:
                sq += np.sum(np.abs(blk) ** 2, axis=0)
            elif mask is not None:
                sq += np.sum(np.abs(blk[mask]) ** 2, axis=0)
        return np.sqrt(sq)

    def overlap_with(self, targets: np.ndarray, dense_ancillas: Sequence[int] = ()) -> np.ndarray:
        """Per-column ``<target_j (x) 0_anc | column_j>`` for dense target vectors."""
        blk = self.zero_block()
        if dense_ancillas:
            idx = np.arange(2**self.dense)
            mask = np.zeros(idx.shape, dtype=bool)
            for w in dense_ancillas:
                mask |= ((idx >> w) & 1).astype(bool)
            blk[mask] = 0
        return np.einsum("ij,ij->j", np.conj(targets), blk)

    def to_pure(self, column: int = 0) -> PureState:
        return PureState(self.column_vectors()[:, column], self.num_qubits, check=False)
