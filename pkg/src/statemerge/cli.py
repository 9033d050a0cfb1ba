"""Command-line front end: demo, merge, verify and sweep.

Exit codes: 0 success, 2 bad configuration, 3 a construction contract was
violated, 4 sampled estimation is infeasible at the requested precision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .batch import BatchState
from .errors import ContractError, InfeasibleEstimationError, NotUnitaryError, ResourceError
from .exact import build_superposition_prep, build_swap_orthogonal, first_bit_index
from .general import general_merge
from .oracle import load_oracle, matrix_oracle, oracle_from_dict, prepared_state
from .statevector import H, X, PureState
from .verification import circuit_to_matrix, error_scaling_sweep, garbage_sweep, ideal_swap

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_INFEASIBLE = 0, 2, 3, 4

CSV_COLUMNS = ("epsilon", "distance_psi", "distance_phi", "leakage", "queries", "k",
               "path", "n", "instance")
VERIFY_COLUMNS = ("seed", "input_index", "leakage", "distance")

EPILOG = """\
sweep CSV columns, in order:
  epsilon        target accuracy
  distance_psi   trace distance of T|0^n> from |psi> (ancillas projected on 0)
  distance_phi   trace distance of T|10^(n-1)> from |phi>
  leakage        max ancilla leakage over the pinned and random inputs
  queries        oracle calls to U and V made by one run of the circuit
  k              zero-chain length (0 on exact paths)
  path           exact-a, exact-b, exact-c, exact-c-orthogonal, near-identity, general
  n, instance    register size and instance index (random-instance sweeps)

verify CSV columns: seed, input_index, leakage, distance (empty for random
inputs; pinned comparisons go to the JSON summary).

JSON outputs carry a top-level "version": 1.
exit codes: 0 ok, 2 config error, 3 contract violation, 4 infeasible estimation
"""


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def _epsilons(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"epsilon list {text!r} is not a comma-separated list of numbers")
    if not vals or any(not 0 < v < 1 for v in vals):
        raise ConfigError("every epsilon must lie strictly between 0 and 1")
    return vals


def _load(path: str | None, what: str):
    if path is None:
        raise ConfigError(f"--oracle-{what} is required for this command")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"oracle file {path} does not exist")
    try:
        return load_oracle(p, name=what.upper())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot parse oracle file {path}: {exc}")


def _write_atomic(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, target)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sidecar(path: str | None, suffix: str) -> str | None:
    return None if path is None else str(Path(path).with_suffix(suffix))


# demo ---------------------------------------------------------------------------

def _ket(vec: np.ndarray, n_main: int, n_total: int, tol: float = 1e-9) -> str:
    terms = []
    for idx in np.flatnonzero(np.abs(vec) > tol):
        amp = vec[idx]
        main = format(idx & ((1 << n_main) - 1), f"0{n_main}b")
        anc = format(idx >> n_main, f"0{n_total - n_main}b") if n_total > n_main else ""
        a = f"{amp.real:+.3f}" if abs(amp.imag) < tol else f"({amp.real:+.3f}{amp.imag:+.3f}j)"
        terms.append(f"{a}|{main}>" + (f"|{anc}>" if anc else ""))
    return " ".join(terms) if terms else "0"


def run_demo(out=None) -> None:
    out = out or sys.stdout
    alpha, beta, gamma = 0.6, 0.48, 0.64
    n = 2
    U = matrix_oracle(np.eye(4), "U")
    V = matrix_oracle(np.kron(X, np.eye(2)), "V")
    swap = build_swap_orthogonal(U, V)
    print("swap of |psi>=|00> and |phi>=|10> (U = I, V = X on the first bit)", file=out)
    print("input alpha|psi> + beta|phi> + gamma|y>, y = |01>, ancilla last:", file=out)
    start = np.zeros(2**swap.num_qubits, dtype=np.complex128)
    start[0], start[first_bit_index(n)], start[1] = alpha, beta, gamma
    state = PureState(start, swap.num_qubits)
    print(f"  start    {_ket(state.amplitudes, n, swap.num_qubits)}", file=out)
    labels = ("M_psi", "c-U^-1", "c-V", "M_phi", "c-V^-1", "c-U", "M_psi")
    for i, op in enumerate(swap.ops):
        batch = BatchState.from_pure(state)
        op.apply(batch)
        state = batch.to_pure()
        print(f"  {labels[i] if i < len(labels) else 'op':8s} {_ket(state.amplitudes, n, swap.num_qubits)}", file=out)
    final = state.amplitudes
    nq = swap.num_qubits
    e_psi, e_phi, e_y = (np.eye(2**nq)[i] for i in (0, first_bit_index(n), 1))
    a2, b2, g2 = (complex(np.vdot(e, final)).real for e in (e_phi, e_psi, e_y))
    leak = float(np.linalg.norm(final[2**n:]))
    print(f"  = (alpha|phi> + beta|psi> + gamma|y>)|0> with alpha={a2:.3f} "
          f"beta={b2:.3f} gamma={g2:.3f}, ancilla leakage {leak:.1e}", file=out)
    print("", file=out)
    a, b = 0.6, 0.8
    Uh = matrix_oracle(H, "U")
    Vh = matrix_oracle(H @ X, "V")
    prep = build_superposition_prep(Uh, Vh, a, b)
    blk, leak = circuit_to_matrix(prep)
    psi, phi = prepared_state(Uh).amplitudes, prepared_state(Vh).amplitudes
    print("superposition with U = H: |psi>=|+>, |phi>=|->, alpha=0.6, beta=0.8", file=out)
    print(f"  T|0>              {_ket(blk[:, 0], 1, 1)}  leakage {leak[0]:.1e}", file=out)
    print(f"  alpha|psi>+beta|phi> {_ket(a * psi + b * phi, 1, 1)}", file=out)


# merge / verify / sweep -----------------------------------------------------------

def _report_row(rep, n, instance=0) -> dict:
    return {
        "epsilon": rep.epsilon, "distance_psi": rep.trace_distance_psi,
        "distance_phi": rep.trace_distance_phi, "leakage": rep.max_ancilla_leakage,
        "queries": sum(sum(v.values()) for v in rep.query_counts.values()),
        "k": rep.iterations_k, "path": rep.path, "n": n, "instance": instance,
    }


def _merge_point(args) -> tuple[dict, dict, dict | None]:
    u_data, v_data, eps, mode, seed, trials, want_circuit = args
    # fixed names keep the per-oracle query counts apart
    U = oracle_from_dict(dict(u_data, name="U"), "U")
    V = oracle_from_dict(dict(v_data, name="V"), "V")
    circ, rep = general_merge(U, V, eps, mode, seed=seed, leakage_trials=trials)
    return _report_row(rep, U.num_qubits), rep.to_dict(), (
        circ.to_dict() if want_circuit else None)


def _oracle_data(path: str | None, what: str) -> dict:
    _load(path, what)  # validates existence, parse and unitarity
    with open(path) as fh:
        return json.load(fh)


def _run_points(points, jobs: int) -> list:
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_merge_point, points))
    return [_merge_point(p) for p in points]


def run_merge(args) -> int:
    eps = _epsilons(args.epsilon)
    u, v = _oracle_data(args.oracle_u, "u"), _oracle_data(args.oracle_v, "v")
    points = [(u, v, e, args.mode, args.seed, args.trials, True) for e in eps]
    results = _run_points(points, args.jobs)
    doc = {"version": 1, "reports": [r[1] for r in results],
           "circuits": [r[2] for r in results]}
    if args.out is None:
        for row, rep, _ in results:
            print(f"eps={row['epsilon']:g} path={row['path']} k={row['k']} "
                  f"d_psi={row['distance_psi']:.3e} d_phi={row['distance_phi']:.3e} "
                  f"leak={row['leakage']:.3e} queries={row['queries']}")
    else:
        _write_atomic(args.out, _json_text(doc))
    return EXIT_OK


def run_sweep(args) -> int:
    eps = _epsilons(args.epsilon)
    if args.oracle_u or args.oracle_v:
        u, v = _oracle_data(args.oracle_u, "u"), _oracle_data(args.oracle_v, "v")
        points = [(u, v, e, args.mode, args.seed, args.trials, False) for e in eps]
        rows = [r[0] for r in _run_points(points, args.jobs)]
        summary = {"version": 1, "eps_values": eps, "seed": args.seed, "mode": args.mode,
                   "constant": max(max(r["distance_psi"], r["distance_phi"], r["leakage"])
                                   / r["epsilon"] for r in rows)}
    else:
        try:
            n_values = [int(x) for x in args.n.split(",")]
        except ValueError:
            raise ConfigError(f"--n {args.n!r} is not a comma-separated list of integers")
        if any(n < 1 for n in n_values) or args.instances < 1:
            raise ConfigError("--n entries and --instances must be positive")
        rows, summary = error_scaling_sweep(n_values, eps, args.instances, args.seed,
                                            args.mode, args.trials, args.jobs)
    _write_atomic(args.out, _csv_text(CSV_COLUMNS, rows))
    if args.out is not None:
        _write_atomic(_sidecar(args.out, ".json"), _json_text(summary))
    return EXIT_OK


def run_verify(args) -> int:
    U, V = _load(args.oracle_u, "u"), _load(args.oracle_v, "v")
    swap = build_swap_orthogonal(U, V)
    psi, phi = prepared_state(U).amplitudes, prepared_state(V).amplitudes
    sweep = garbage_sweep(swap, trials=args.trials, seed=args.seed)
    rows = [{"seed": r.seed, "input_index": r.index, "leakage": r.leakage,
             "distance": r.distance} for r in sweep.records]
    summary = {"version": 1, "construction": swap.name, "trials": args.trials,
               "seed": args.seed, "max_leakage": sweep.max_leakage}
    if swap.num_qubits <= 12:
        blk, leak = circuit_to_matrix(swap)
        summary["max_matrix_error"] = float(np.abs(blk - ideal_swap(psi, phi)).max())
        summary["max_basis_leakage"] = float(leak.max())
    _write_atomic(args.out, _csv_text(VERIFY_COLUMNS, rows))
    if args.out is None:
        print(_json_text(summary), end="")
    else:
        _write_atomic(_sidecar(args.out, ".json"), _json_text(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statemerge",
        description="Garbage-free merging of two black-box state preparations.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, eps_default="0.3,0.2,0.1"):
        p.add_argument("--oracle-u", metavar="PATH", help="oracle JSON preparing |psi>")
        p.add_argument("--oracle-v", metavar="PATH", help="oracle JSON preparing |phi>")
        p.add_argument("--epsilon", metavar="LIST", default=eps_default,
                       help="comma-separated accuracies in (0, 1)")
        p.add_argument("--mode", choices=("sampled", "exact", "injected"), default="injected",
                       help="angle estimation mode (default: injected)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=50,
                       help="random inputs for leakage checks")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")

    sub.add_parser("demo", help="print the worked swap and superposition examples",
                   epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p = sub.add_parser("merge", help="build a merge circuit; writes circuit JSON and report",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p, "0.1")
    p = sub.add_parser("verify", help="garbage sweep and matrix check of the swap circuit",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p = sub.add_parser("sweep", help="merge over an epsilon list; writes CSV",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--n", default="1,2,3",
                   help="register sizes for random instances (when no oracles are given)")
    p.add_argument("--instances", type=int, default=30,
                   help="random instances per (n, epsilon) point")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "trials", 1) < 1 or getattr(args, "jobs", 1) < 1:
            raise ConfigError("--trials and --jobs must be positive")
        if args.command == "demo":
            run_demo()
            return EXIT_OK
        return {"merge": run_merge, "verify": run_verify, "sweep": run_sweep}[args.command](args)
    except (ConfigError, NotUnitaryError, ValueError) as exc:
        print(f"statemerge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, ResourceError) as exc:
        print(f"statemerge: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except InfeasibleEstimationError as exc:
        print(f"statemerge: infeasible estimation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
