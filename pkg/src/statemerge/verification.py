"""Reference unitaries, matrix extraction, garbage sweeps and error-scaling runs."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import Circuit, Gate, OracleCall
from .errors import ResourceError
from .exact import first_bit_index
from .oracle import BlackBoxUnitary, matrix_oracle
from .statevector import X, PureState, QubitLayout

MAX_MATRIX_QUBITS = 12


@dataclass(frozen=True)
class IdealTarget:
    """A unitary pinned on some basis inputs and completed deterministically."""

    n: int
    pairs: tuple[tuple[int, np.ndarray], ...]
    completion: np.ndarray

    def __post_init__(self):
        m = self.completion
        if not np.allclose(m.conj().T @ m, np.eye(2**self.n), atol=1e-10):
            raise ValueError("completion is not unitary")
        for idx, tgt in self.pairs:
            if not np.allclose(m[:, idx], tgt, atol=1e-10):
                raise ValueError(f"completion does not send |{idx}> to its target")


def complete_unitary(columns: dict[int, np.ndarray], dim: int) -> np.ndarray:
    """Fill the unpinned columns by Gram-Schmidt over the computational basis in order."""
    out = np.zeros((dim, dim), dtype=np.complex128)
    basis = [np.asarray(v, dtype=np.complex128) for v in columns.values()]
    for idx, v in columns.items():
        out[:, idx] = v
    free = [j for j in range(dim) if j not in columns]
    candidates = iter(range(dim))
    for j in free:
        while True:
            e = np.zeros(dim, dtype=np.complex128)
            e[next(candidates)] = 1.0
            # two passes keep the result orthogonal to 1e-15
            for _ in range(2):
                for b in basis:
                    e = e - np.vdot(b, e) * b
            nrm = np.linalg.norm(e)
            if nrm > 1e-8:
                e = e / nrm
                break
        basis.append(e)
        out[:, j] = e
    return out


def build_ideal_merge(psi: PureState, phi: PureState) -> IdealTarget:
    """Unitary with ``|0^n> -> psi`` and ``|10^{n-1}> -> phi``."""
    if psi.num_qubits != phi.num_qubits:
        raise ValueError("targets live on different register sizes")
    if abs(np.vdot(psi.amplitudes, phi.amplitudes)) > 1e-9:
        raise ValueError("targets are not orthogonal")
    n = psi.num_qubits
    e1 = first_bit_index(n)
    comp = complete_unitary({0: psi.amplitudes, e1: phi.amplitudes}, 2**n)
    return IdealTarget(n, ((0, psi.amplitudes.copy()), (e1, phi.amplitudes.copy())), comp)


def ideal_swap(psi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Swap two orthonormal vectors, identity on their complement."""
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    dim = psi.shape[0]
    P, F = np.outer(psi, psi.conj()), np.outer(phi, phi.conj())
    return (np.eye(dim) - P - F + np.outer(psi, phi.conj()) + np.outer(phi, psi.conj()))


def circuit_to_matrix(circuit: Circuit, ancillas_zero: bool = True):
    """Circuit on every main basis input.

    With ``ancillas_zero`` returns ``(block, leakage)``: the main-register
    block with ancillas in and out at 0, and the leaked norm per column.
    Otherwise the full ``2^N x 2^N`` matrix.
    """
    if circuit.num_qubits > MAX_MATRIX_QUBITS:
        raise ResourceError(
            f"circuit has {circuit.num_qubits} qubits; matrix extraction stops at "
            f"{MAX_MATRIX_QUBITS}"
        )
    if ancillas_zero:
        n = circuit.n_main
        out = circuit.run_main(np.eye(2**n, dtype=np.complex128))
        return out.zero_block(), out.leakage()
    from .batch import BatchState

    dim = 2**circuit.num_qubits
    batch = BatchState.from_columns(np.eye(dim), circuit.num_qubits, circuit.num_qubits)
    return circuit.simulate(batch).column_vectors()


def random_state(n: int, rng: np.random.Generator, real: bool = False) -> np.ndarray:
    return PureState.random(n, rng, real=real).amplitudes


@dataclass
class SweepRecord:
    seed: int | None
    index: int
    leakage: float
    distance: float | None = None


@dataclass
class GarbageSweep:
    max_leakage: float
    records: list[SweepRecord] = field(default_factory=list)


def garbage_sweep(circuit: Circuit, layout: QubitLayout | None = None, trials: int = 100,
                  seed: int | None = 0) -> GarbageSweep:
    """Leakage on ``trials`` random main inputs with ancillas at 0.

    The main register must sit on wires ``0..n-1`` (all constructions here
    place it there); ``layout`` defaults to the circuit's own.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    layout = layout or circuit.layout
    n = len(layout.main)
    if tuple(layout.main) != tuple(range(n)):
        raise ValueError("main register must occupy the lowest wires")
    rng = np.random.default_rng(seed)
    cols = np.stack([random_state(n, rng) for _ in range(trials)], axis=1)
    leak = circuit.run_main(cols).leakage()
    records = [SweepRecord(seed, i, float(v)) for i, v in enumerate(leak)]
    return GarbageSweep(float(leak.max()), records)


# random instances -------------------------------------------------------------

def unitary_with_first_column(v: np.ndarray, rng: np.random.Generator,
                              real: bool = False) -> np.ndarray:
    """Random unitary (orthogonal when ``real``) whose column 0 is ``v``."""
    v = np.asarray(v, dtype=np.complex128)
    dim = v.shape[0]
    g = rng.normal(size=(dim, dim)).astype(np.complex128)
    if not real:
        g += 1j * rng.normal(size=(dim, dim))
    g[:, 0] = v
    q, r = np.linalg.qr(g)
    # fix column phases so column 0 equals v exactly
    d = np.diag(r)
    q = q * (d / np.abs(d))
    q[:, 0] = v
    if real:
        q = q.real.astype(np.complex128)
    return q


def random_orthogonal_pair(n: int, rng: np.random.Generator,
                           real: bool = False) -> tuple[np.ndarray, np.ndarray]:
    a = random_state(n, rng, real)
    b = random_state(n, rng, real)
    b = b - np.vdot(a, b) * a
    return a, b / np.linalg.norm(b)


def random_instance(n: int, rng: np.random.Generator, real: bool = True):
    """``(U, V)`` matrix oracles preparing a random orthogonal pair."""
    psi, phi = random_orthogonal_pair(n, rng, real)
    U = matrix_oracle(unitary_with_first_column(psi, rng, real), "U")
    V = matrix_oracle(unitary_with_first_column(phi, rng, real), "V")
    return U, V


def garbage_oracle(prep: np.ndarray, ancillas: int, name: str = "U") -> BlackBoxUnitary:
    """Circuit-form oracle preparing ``prep[:, 0]`` that dirties its ancillas elsewhere.

    Every main wire is copied onto the ancillas (so ``|0^n>`` leaves them
    clean and other basis inputs do not), then ``prep`` runs on the main
    register.
    """
    inner = matrix_oracle(prep, name + "_core")
    n = inner.num_qubits
    ops = []
    for q in range(n):
        for a in range(ancillas):
            ops.append(Gate(X, n + a, ((q, 1),), "X"))
    ops.append(OracleCall(inner, tuple(range(n))))
    circ = Circuit(n + ancillas, QubitLayout.simple(n, ancillas), tuple(ops), name)
    return BlackBoxUnitary(n, circuit=circ, ancillas=ancillas, name=name)


# cleanup-angle oracle -----------------------------------------------------------

def _flag_amplitudes(cos_theta: float, k: int) -> np.ndarray:
    """Flag register of the orthogonal branch after the zero-chain: ``c^j`` on ``1^j 0^{k-j}``."""
    vec = np.zeros(2**k)
    for j in range(k):
        vec[(1 << j) - 1] = cos_theta**j
    return vec / np.linalg.norm(vec)


def _cleanup_step(vec: np.ndarray, i: int, angle: float) -> np.ndarray:
    """Rotate flag ``i-1`` when flag ``i`` is 0, flip it when flag ``i`` is 1 (0-based)."""
    lo, hi = 1 << (i - 1), 1 << i
    idx = np.arange(vec.shape[0])
    base = idx[(idx & lo) == 0]
    a0, a1 = vec[base], vec[base | lo]
    s, c = math.sin(angle), math.cos(angle)
    flip = (base & hi) != 0
    out = vec.copy()
    out[base] = np.where(flip, a1, s * a0 + c * a1)
    out[base | lo] = np.where(flip, a0, -c * a0 + s * a1)
    return out


def _leak(vec: np.ndarray, i: int) -> float:
    lo, hi = 1 << (i - 1), 1 << i
    idx = np.arange(vec.shape[0])
    sel = ((idx & lo) != 0) & ((idx & hi) == 0)
    return float(np.sum(vec[sel] ** 2))


def optimal_cleanup_angles(cos_theta: float, steps: int, grid: int = 721) -> list[float]:
    """Angles found by direct search that leave no weight on each cleared flag."""
    vec = _flag_amplitudes(cos_theta, steps + 1)
    angles = []
    xs = np.linspace(0.0, math.pi, grid)
    for i in range(1, steps + 1):
        f = lambda x, v=vec, i=i: _leak(_cleanup_step(v, i, x), i)
        vals = [f(x) for x in xs]
        j = int(np.argmin(vals))
        lo, hi = xs[max(0, j - 1)], xs[min(grid - 1, j + 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        angles.append(float(res.x))
        vec = _cleanup_step(vec, i, res.x)
    return angles


# error-scaling sweep ------------------------------------------------------------

CSV_COLUMNS = ("n", "instance", "epsilon", "distance_psi", "distance_phi", "leakage",
               "queries", "k", "path")


def _sweep_point(args) -> list[dict]:
    n, eps, instances, seed, mode, trials = args
    from .general import general_merge

    rows = []
    for i in range(instances):
        rng = np.random.default_rng([seed, n, i])
        U, V = random_instance(n, rng, real=True)
        circ, rep = general_merge(U, V, eps, mode, seed=int(rng.integers(2**31)),
                                  leakage_trials=trials)
        queries = sum(sum(v.values()) for v in rep.query_counts.values())
        rows.append({
            "n": n, "instance": i, "epsilon": eps,
            "distance_psi": rep.trace_distance_psi, "distance_phi": rep.trace_distance_phi,
            "leakage": rep.max_ancilla_leakage, "queries": queries,
            "k": rep.iterations_k, "path": rep.path,
            "residual": circ.meta.get("residual"),
            "truncation": rep.truncation_bound,
        })
    return rows


def error_scaling_sweep(n_values=(1, 2, 3), eps_values=(0.3, 0.2, 0.1), instances: int = 30,
                        seed: int = 0, mode: str = "injected_error", trials: int = 50,
                        jobs: int = 1) -> tuple[list[dict], dict]:
    """Merge random real instances over a grid; returns rows and a summary.

    The summary's ``constant`` is the smallest ``C`` with every distance and
    leakage at most ``C * eps``.  Rows come back ordered by ``(eps, n,
    instance)`` whatever ``jobs`` is.
    """
    points = [(n, e, instances, seed, mode, trials) for e in eps_values for n in n_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_sweep_point, points))
    else:
        chunks = [_sweep_point(p) for p in points]
    rows = [r for chunk in chunks for r in chunk]
    worst = max((max(r["distance_psi"], r["distance_phi"], r["leakage"]) / r["epsilon"]
                 for r in rows), default=0.0)
    summary = {
        "version": 1,
        "n_values": list(n_values),
        "eps_values": list(eps_values),
        "instances": instances,
        "seed": seed,
        "mode": mode,
        "constant": worst,
        "max_k": max((r["k"] for r in rows), default=0),
    }
    return rows, summary
