"""Approximate merge for pairs that no exact special case covers.

Pipeline, working in the frame ``omega = U^-1|phi>`` (orthogonal to ``|0^n>``):

1. ``A = X_first U^-1 V`` prepares ``chi = X_first omega = c|0^n> + s|chi'>``;
   estimate ``|c|`` and its sign.
2. Build a circuit that cleanly prepares ``chi'`` (up to ``O(eps)``) by
   repeatedly re-applying ``A`` to the ``|0^n>`` branch and then rotating the
   unary "still zero" flags back to ``|0>``.
3. Harden it into a swap of ``|0^n>`` and ``chi'``.
4. Rotate ``|0^n>`` onto ``c|0^n> + s|chi'>`` with the two-ancilla protocol.
5. Conjugate by ``X_first`` and finish with ``U``.

Estimation is classical, so there is no angle register to uncompute; the
analytic bound on that step lives in :func:`verify_theta_cleanup_bound`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .batch import BatchState
from .circuit import Circuit, Gate, OracleCall, ZeroControl
from .errors import ContractError, InfeasibleEstimationError
from .exact import (
    NotApplicable,
    basis_fragment,
    build_exact_merge_special,
    compose_fragments,
    first_bit_index,
    first_bit_wire,
    harden_fragment,
    oracle_fragment,
    superposition_fragments,
)
from .oracle import AccessMode, BlackBoxUnitary, invoke, prepared_state
from .statevector import X, PureState, QubitLayout, inner_product

log = logging.getLogger(__name__)

MODES = ("sampled", "exact_oracle", "injected_error")
MODE_ALIASES = {"exact": "exact_oracle", "injected": "injected_error",
                "sampled": "sampled", "exact_oracle": "exact_oracle",
                "injected_error": "injected_error"}
DEFAULT_MAX_SAMPLES = 10**7
REAL_TOL = 1e-12
# simulation drops ancilla configurations below this norm; the dropped total
# is reported as ``truncation_bound``
EVAL_PRUNE = 1e-9


def _mode(mode: str) -> str:
    try:
        return MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown estimation mode {mode!r}; pick one of {MODES}") from None


# angle estimation -------------------------------------------------------------

def hoeffding_sample_count(precision: float, failure: float) -> float:
    """Samples so that ``P(|mean - p| >= precision) <= failure`` for a Bernoulli mean.

    Returned as a float because the literal parameters overflow any sane
    integer budget; callers compare it against their limit first.
    """
    if not 0 < precision < 1 or not 0 < failure < 1:
        raise ValueError("precision and failure must lie in (0, 1)")
    return math.ceil(-math.log(failure / 2) / (2 * precision**2))


def unbounded_sample_count(epsilon: float) -> float:
    """Sample count at precision ``eps**18`` and failure ``eps**2``."""
    return hoeffding_sample_count(epsilon**18, epsilon**2)


@dataclass(frozen=True)
class AngleEstimate:
    """Estimate of ``cos(theta) = <0^n|U|0^n>`` for a real preparation."""

    cos_abs: float
    sign: int | None = None
    epsilon: float | None = None
    mode: str = "exact_oracle"
    samples_used: int = 0
    sign_trials: int = 0

    def __post_init__(self):
        if not 0.0 <= self.cos_abs <= 1.0:
            raise ValueError(f"cos_abs {self.cos_abs} outside [0, 1]")
        if self.sign not in (None, 1, -1):
            raise ValueError("sign must be +1, -1 or None")
        if self.mode == "sampled" and self.samples_used <= 0:
            raise ValueError("sampled estimates must record their samples")

    @property
    def cos_signed(self) -> float:
        return (self.sign or 1) * self.cos_abs

    @property
    def sin(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.cos_abs**2))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sign"] = "undetermined" if self.sign is None else self.sign
        return d


def _zero_overlap(U: BlackBoxUnitary) -> complex:
    batch = BatchState.from_columns(np.eye(2**U.num_qubits, 1), U.width, U.num_qubits)
    U.invoke(AccessMode.APPLY, batch, tuple(range(U.width)))
    return complex(batch.zero_block()[0, 0])


def estimate_cos_squared(U: BlackBoxUnitary, precision: float, failure: float,
                         mode: str = "exact_oracle", *, rng: np.random.Generator | None = None,
                         injected_offset: float = 0.0,
                         max_samples: int = DEFAULT_MAX_SAMPLES) -> AngleEstimate:
    """Estimate ``|<0^n|U|0^n>|`` (sign left undetermined).

    ``sampled`` prepares ``U|0^n>`` once per Hoeffding sample and measures
    whether the register reads ``0^n``.  ``exact_oracle`` reads the
    amplitude off the simulator.  ``injected_error`` adds ``injected_offset``
    to the exact ``|cos|`` (clipped to ``[0, 1]``).
    """
    mode = _mode(mode)
    if not 0 < precision < 1 or not 0 < failure < 1:
        raise ValueError("precision and failure must lie in (0, 1)")
    if mode == "sampled":
        need = hoeffding_sample_count(precision, failure)
        if need > max_samples:
            raise InfeasibleEstimationError(need, max_samples)
        rng = rng if rng is not None else np.random.default_rng()
        n_samples = int(need)
        hits = 0
        reg = tuple(range(U.width))
        e0 = np.eye(2**U.num_qubits, 1)
        for _ in range(n_samples):
            batch = BatchState.from_columns(e0, U.width, U.num_qubits)
            U.invoke(AccessMode.APPLY, batch, reg)
            p0 = sum(float(abs(blk[0, 0]) ** 2) for blk in batch.blocks.values())
            hits += rng.random() < p0
        cos_sq = hits / n_samples
        return AngleEstimate(math.sqrt(cos_sq), None, None, mode, n_samples)
    c = abs(_zero_overlap(U))
    if mode == "injected_error":
        c = min(1.0, max(0.0, c + injected_offset))
    return AngleEstimate(min(1.0, c), None, None, mode, 0)


def estimate_sign(U: BlackBoxUnitary, cos_abs: float, epsilon: float,
                  mode: str = "exact_oracle", *, rng: np.random.Generator | None = None,
                  max_trials: int | None = None) -> tuple[int | None, int]:
    """Sign of ``<0^n|U|0^n>``; returns ``(sign, trials_used)``.

    Below ``epsilon`` the sign does not matter and ``None`` comes back.  In
    sampled mode a control qubit is prepared in
    ``(|c| |0> + |1>)/sqrt(1 + c^2)``, ``U`` is applied to ``|0^n>`` under
    that control, and when the register is found in ``|0^n>`` the control
    is read in the ``+/-`` basis.  Up to ``ceil(2/eps^4)`` trials; majority
    vote over the conditional successes.
    """
    mode = _mode(mode)
    if not 0.0 <= cos_abs <= 1.0:
        raise ValueError("cos_abs must lie in [0, 1]")
    if cos_abs < epsilon:
        return None, 0
    if mode != "sampled":
        c = _zero_overlap(U)
        return (1 if c.real >= 0 else -1), 0

    rng = rng if rng is not None else np.random.default_rng()
    cap = max_trials or math.ceil(2 / epsilon**4)
    n, w = U.num_qubits, U.width
    ctrl_wire = w
    norm = math.sqrt(1 + cos_abs**2)
    # control on the wire above the oracle register
    start = np.zeros((2 ** (w + 1), 1), dtype=np.complex128)
    start[0, 0] = cos_abs / norm
    start[1 << ctrl_wire, 0] = 1 / norm
    votes = 0
    successes = 0
    for _ in range(cap):
        batch = BatchState.from_columns(start, w + 1, w + 1)
        U.invoke(AccessMode.CONTROLLED_APPLY, batch, tuple(range(w)), ((ctrl_wire, 1),))
        amps = batch.column_vectors()[:, 0]
        a0, a1 = amps[0], amps[1 << ctrl_wire]
        p_zero = abs(a0) ** 2 + abs(a1) ** 2
        if rng.random() >= p_zero:
            continue
        successes += 1
        p_plus = abs(a0 + a1) ** 2 / (2 * p_zero)
        votes += 1 if rng.random() < p_plus else -1
    if successes == 0:
        log.warning("sign detection: no conditional success in %d trials", cap)
        return None, cap
    if votes == 0:
        log.warning("sign detection: tied vote over %d successes", successes)
        return None, cap
    return (1 if votes > 0 else -1), cap


def estimate_angle(U: BlackBoxUnitary, epsilon: float, mode: str = "exact_oracle", *,
                   precision: float | None = None, failure: float | None = None,
                   rng: np.random.Generator | None = None, injected_offset: float = 0.0,
                   max_samples: int = DEFAULT_MAX_SAMPLES,
                   max_sign_trials: int | None = None) -> AngleEstimate:
    """Both estimation steps; defaults to precision ``eps**18`` and failure ``eps**2``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    precision = epsilon**18 if precision is None else precision
    failure = epsilon**2 if failure is None else failure
    est = estimate_cos_squared(U, precision, failure, mode, rng=rng,
                               injected_offset=injected_offset, max_samples=max_samples)
    sign, trials = estimate_sign(U, est.cos_abs, epsilon, mode, rng=rng,
                                 max_trials=max_sign_trials)
    return AngleEstimate(est.cos_abs, sign, epsilon, est.mode, est.samples_used, trials)


# orthogonal component -----------------------------------------------------------

def theta_prime(n: int, cos_theta: float) -> float:
    """Cleanup angle for the ``n``-th flag of the zero-chain.

    Before step ``n`` the flag-0 branch holds ``sin * sqrt(sum_{i<n} c^{2i})``
    and the flag-1 branch ``sin * c^n``; the branches are orthogonal so they
    combine in quadrature::

        theta'_n = arccos(c^n / sqrt((1 - c^{2n}) / (1 - c^2) + c^{2n}))

    At ``n = 1`` this equals the linear-sum variant in
    :func:`theta_prime_linear_sum`.
    """
    if n < 1:
        raise ValueError("rotation index starts at 1")
    x = float(cos_theta)
    if abs(x) >= 1.0:
        raise ValueError("theta_prime is singular at |cos(theta)| = 1")
    xn = x**n
    head = (1 - x ** (2 * n)) / (1 - x * x)
    return math.acos(max(-1.0, min(1.0, xn / math.sqrt(head + xn * xn))))


def theta_prime_linear_sum(n: int, cos_theta: float) -> float:
    """Variant that adds the earlier flag amplitudes linearly, ``(1 - c^n)/(1 - c)``.

    Kept for comparison: it matches :func:`theta_prime` only at ``n = 1``
    and leaves residue on the flags for ``n >= 2``.
    """
    if n < 1:
        raise ValueError("rotation index starts at 1")
    x = float(cos_theta)
    if x == 1.0:
        raise ValueError("theta_prime is singular at cos(theta) = 1")
    xn = x**n
    geo = (1 - xn) / (1 - x)
    return math.acos(max(-1.0, min(1.0, xn / math.sqrt(geo * geo + xn * xn))))


def cleanup_rotation(theta: float) -> np.ndarray:
    """Maps ``(sin t, cos t)`` amplitudes on ``(|0>, |1>)`` to ``(1, 0)``."""
    s, c = math.sin(theta), math.cos(theta)
    return np.array([[s, c], [-c, s]], dtype=np.complex128)


def chain_length(cos_abs: float, epsilon: float) -> int:
    """Smallest ``k >= 1`` with ``cos_abs**k <= epsilon``.

    Capped at ``ceil(2 ln(1/eps) / eps^2)``, which is never binding once
    ``sin(theta) >= eps``.
    """
    cap = math.ceil(2 * math.log(1 / epsilon) / epsilon**2)
    if cos_abs <= epsilon:
        return 1
    k = math.ceil(math.log(epsilon) / math.log(cos_abs) - 1e-12)
    return max(1, min(k, cap))


def build_orthogonal_component(U: BlackBoxUnitary, estimate: AngleEstimate,
                               epsilon: float) -> Circuit:
    """Fragment preparing the part of ``U|0^n>`` orthogonal to ``|0^n>``.

    Wires: main ``0..n-1``, the oracle's ancillas, then ``k`` flag ancillas.
    ``U`` is applied, and each time the register is still ``|0^n>`` a flag
    is raised and ``U`` applied again under it.  The flags then get rotated
    back down pairwise, leaving only the ``|cos|^k`` residue (on the last
    flag).  Returns an empty fragment when ``sin < epsilon``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n, m = U.num_qubits, U.ancillas
    if estimate.sin < epsilon:
        return Circuit(n, QubitLayout.simple(n), (), "orth-empty", {"k": 0})
    if estimate.sign is None and estimate.cos_abs >= epsilon:
        raise ContractError("sign of cos(theta) is needed for controlled applications")
    c = estimate.cos_signed
    k = chain_length(estimate.cos_abs, epsilon)
    reg = tuple(range(n + m))
    flags = [n + m + i for i in range(k)]
    ops: list = [OracleCall(U, reg)]
    for j in range(k):
        ops.append(ZeroControl(reg, flags[j]))
        if j < k - 1:
            ops.append(OracleCall(U, reg, controls=((flags[j], 1),)))
    for i in range(1, k):
        lo, hi = flags[i - 1], flags[i]
        ops.append(Gate(cleanup_rotation(theta_prime(i, c)), lo, ((hi, 0),), f"R{i}"))
        ops.append(Gate(X, lo, ((hi, 1),), "X"))
    layout = QubitLayout(tuple(range(n)), tuple(range(n, n + m + k)))
    return Circuit(n + m + k, layout, tuple(ops), f"orth({U.name})",
                   {"k": k, "cos_hat": c, "residual_bound": abs(c) ** k})


def chain_residual(orth: Circuit, prune: float = EVAL_PRUNE) -> float:
    """Norm left on ``|0^n>`` (any ancilla pattern) after the orthogonal-component circuit."""
    out = orth.run_main(np.eye(2**orth.n_main, 1), prune=prune)
    return math.sqrt(sum(float(abs(blk[0, 0]) ** 2) for blk in out.blocks.values()))


# full merge -------------------------------------------------------------------

@dataclass
class MergeReport:
    epsilon: float
    path: str
    num_qubits: int
    circuit_qubits: int
    trace_distance_psi: float
    trace_distance_phi: float
    max_ancilla_leakage: float
    iterations_k: int
    query_counts: dict
    estimation_queries: dict = field(default_factory=dict)
    estimate: dict | None = None
    leakage_trials: int = 0
    chain_residual: float | None = None
    truncation_bound: float = 0.0

    @property
    def trace_distance_on_targets(self) -> tuple[float, float]:
        return (self.trace_distance_psi, self.trace_distance_phi)

    def to_dict(self) -> dict:
        d = {"version": 1}
        d.update(asdict(self))
        return d


def evaluate_merge(circuit: Circuit, psi: PureState, phi: PureState, trials: int,
                   rng: np.random.Generator,
                   prune: float = EVAL_PRUNE) -> tuple[float, float, float, float]:
    """Trace distances on ``|0^n>`` and ``|10^{n-1}>``, max leakage, truncation bound.

    The pinned inputs and ``trials`` random inputs run as columns of a single
    batch; leakage is taken over every column.  The last value bounds the
    2-norm error of every simulated column caused by pruning.
    """
    n = circuit.n_main
    dim = 2**n
    cols = [np.eye(dim)[:, 0], np.eye(dim)[:, first_bit_index(n)]]
    for _ in range(trials):
        cols.append(PureState.random(n, rng).amplitudes)
    out = circuit.run_main(np.stack(cols, axis=1), prune=prune)
    block = out.zero_block()
    leaks = out.leakage()

    def dist(target: np.ndarray, col: int) -> float:
        # 1 - |<t|b>|^2 split into the orthogonal part of b and the leaked mass
        b = block[:, col]
        perp = b - np.vdot(target, b) * target
        return min(1.0, math.sqrt(float(np.vdot(perp, perp).real) + leaks[col] ** 2))

    d_psi, d_phi = dist(psi.amplitudes, 0), dist(phi.amplitudes, 1)
    return d_psi, d_phi, float(leaks.max()), float(out.truncation.max())


def _require_real(vec: np.ndarray, what: str) -> None:
    # a global phase is allowed; strip it using the largest entry
    i = int(np.argmax(np.abs(vec)))
    ph = vec[i] / abs(vec[i])
    if np.max(np.abs((vec / ph).imag)) > REAL_TOL:
        raise ContractError(f"{what} has complex amplitudes; the general path needs real ones")


def composite_preparation(U: BlackBoxUnitary, V: BlackBoxUnitary) -> BlackBoxUnitary:
    """``A = X_first U^-1 V`` as a circuit-form oracle built only from queries."""
    n, m = U.num_qubits, V.ancillas
    ops = (
        OracleCall(V, tuple(range(n + m))),
        OracleCall(U, tuple(range(n)), adjoint=True),
        Gate(X, first_bit_wire(n), (), "X"),
    )
    circ = Circuit(n + m, QubitLayout.simple(n, m), ops, "A")
    return BlackBoxUnitary(n, circuit=circ, ancillas=m, name="A")


def _counts_snapshot(*oracles: BlackBoxUnitary) -> dict:
    return {o.name: o.counts_dict() for o in oracles}


def _counts_diff(before: dict, after: dict) -> dict:
    return {name: {m: after[name][m] - before[name].get(m, 0) for m in after[name]}
            for name in after}


def general_merge(U: BlackBoxUnitary, V: BlackBoxUnitary, epsilon: float,
                  estimation_mode: str = "injected_error", *,
                  injected_offset: float | None = None, seed: int | None = 0,
                  precision: float | None = None, failure: float | None = None,
                  max_samples: int = DEFAULT_MAX_SAMPLES, leakage_trials: int = 50,
                  max_sign_trials: int | None = None,
                  evaluate: bool = True,
                  prune: float = EVAL_PRUNE) -> tuple[Circuit, MergeReport]:
    """Circuit ``T`` with ``T|0^n> ~ |psi>`` and ``T|10^{n-1}> ~ |phi>``, ancillas clean to ``O(eps)``.

    Exact special cases are delegated to :func:`build_exact_merge_special`.
    ``injected_offset`` defaults to ``eps**9`` in injected mode.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    mode = _mode(estimation_mode)
    if U.num_qubits != V.num_qubits:
        raise ValueError("U and V act on different register sizes")
    if not U.is_matrix:
        raise ContractError("U must be garbage-free (matrix form) for merging")
    rng = np.random.default_rng(seed)
    n = U.num_qubits
    before = _counts_snapshot(U, V)

    special = build_exact_merge_special(U, V)
    psi, phi = prepared_state(U), prepared_state(V)
    est = None
    k = 0
    residual = None
    if special:
        circuit = special
        path = "exact-" + special.meta["case"]
    else:
        _require_real(psi.amplitudes, "psi")
        _require_real(phi.amplitudes, "phi")
        omega = invoke(U, AccessMode.ADJOINT, phi)
        _require_real(omega.amplitudes, "U^-1 phi")
        A = composite_preparation(U, V)
        offset = epsilon**9 if injected_offset is None else injected_offset
        est = estimate_angle(A, epsilon, mode, precision=precision, failure=failure,
                             rng=rng, injected_offset=offset if mode == "injected_error" else 0.0,
                             max_samples=max_samples, max_sign_trials=max_sign_trials)
        fe1 = basis_fragment(n, first_bit_index(n))
        fu = oracle_fragment(U)
        if est.sin < epsilon:
            circuit = compose_fragments(fu, name="merge-near-identity")
            path = "near-identity"
        else:
            orth = build_orthogonal_component(A, est, epsilon)
            k = orth.meta["k"]
            residual = chain_residual(orth, prune)
            hard = harden_fragment(orth, name="harden(orth)")
            rot = superposition_fragments(None, hard, est.cos_signed, est.sin, name="rotate")
            circuit = compose_fragments(fe1, rot, fe1, fu, name="merge-general")
            path = "general"
        circuit = Circuit(circuit.num_qubits, circuit.layout, circuit.ops, circuit.name,
                          {"path": path, "k": k, "residual": residual})
    estimation_queries = _counts_diff(before, _counts_snapshot(U, V))

    counts = circuit.query_counts()
    report = MergeReport(
        epsilon=epsilon,
        path=path,
        num_qubits=n,
        circuit_qubits=circuit.num_qubits,
        trace_distance_psi=float("nan"),
        trace_distance_phi=float("nan"),
        max_ancilla_leakage=float("nan"),
        iterations_k=k,
        query_counts={name: counts.get(name, {}) for name in (U.name, V.name)},
        estimation_queries=estimation_queries,
        estimate=est.to_dict() if est is not None else None,
        leakage_trials=leakage_trials,
        chain_residual=residual,
    )
    if evaluate:
        d_psi, d_phi, leak, trunc = evaluate_merge(circuit, psi, phi, leakage_trials, rng,
                                                   prune)
        report.truncation_bound = trunc
        report.trace_distance_psi = d_psi
        report.trace_distance_phi = d_phi
        report.max_ancilla_leakage = leak
    return circuit, report


# cleanup bound ------------------------------------------------------------------

@dataclass(frozen=True)
class CleanupBound:
    epsilon: float
    tail_mass: float
    K: float
    first_inner_product: float
    first_threshold: float
    second_inner_product: float
    second_threshold: float
    first_distance: float
    second_distance: float
    first_bound: float
    second_bound: float
    total_bound: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_theta_cleanup_bound(weights: Sequence[float], per_bin_distance: Sequence[float],
                               in_range: Sequence[bool], epsilon: float,
                               K: float | None = None) -> CleanupBound:
    """Check the two perturbation steps behind reversing the angle estimate.

    ``weights`` is the probability of each estimated-angle bin,
    ``per_bin_distance`` the trace distance between that bin's outcome and
    the ideal swap, ``in_range`` marks bins within the estimation window.

    Step one replaces out-of-window outcomes by the ideal: inner product
    ``1 - tail + sum_out w sqrt(1 - d^2)``, which must exceed ``1 - 2 eps^2``
    and gives distance at most ``2 eps sqrt(1 - eps^2)``.  Step two replaces
    in-window outcomes: inner product ``sum_in w sqrt(1 - d^2) + tail`` must
    reach ``sqrt(1 - K eps^2)``, giving distance at most ``sqrt(K) eps``.
    ``K`` defaults to ``max_in d^2 / eps^2``.
    """
    w = np.asarray(weights, dtype=float)
    d = np.asarray(per_bin_distance, dtype=float)
    inr = np.asarray(in_range, dtype=bool)
    if not (w.shape == d.shape == inr.shape):
        raise ValueError("weights, distances and window mask must align")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be a probability distribution")
    if np.any((d < 0) | (d > 1)):
        raise ValueError("per-bin distances must lie in [0, 1]")
    eps = float(epsilon)
    tail = float(w[~inr].sum())
    if tail > eps**2 + 1e-15:
        raise ContractError(f"out-of-window mass {tail:.3g} exceeds eps^2 = {eps**2:.3g}")
    overlap = np.sqrt(1.0 - d**2)
    if K is None:
        K = float((d[inr] ** 2).max() / eps**2) if inr.any() else 0.0
    first = 1.0 - tail + float((w[~inr] * overlap[~inr]).sum())
    second = float((w[inr] * overlap[inr]).sum()) + tail
    first_thr = 1.0 - 2 * eps**2
    second_thr = math.sqrt(max(0.0, 1.0 - K * eps**2))
    first_bound = 2 * eps * math.sqrt(1 - eps**2)
    second_bound = math.sqrt(K) * eps
    first_dist = math.sqrt(max(0.0, 1.0 - first**2))
    second_dist = math.sqrt(max(0.0, 1.0 - second**2))
    slack = 1e-12
    holds = (first > first_thr and second >= second_thr - slack
             and first_dist <= first_bound + slack and second_dist <= second_bound + slack)
    return CleanupBound(eps, tail, K, first, first_thr, second, second_thr, first_dist,
                        second_dist, first_bound, second_bound, first_bound + second_bound,
                        holds)
