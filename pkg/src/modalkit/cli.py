"""Command-line front end: analyze, continue, simulate, check-symmetry.

All outputs are machine readable (JSON with ``"schema": 1`` or CSV) and
deterministic for a fixed configuration and seed.  Exit codes: 2 for a
malformed system file, 3 when no equilibrium is found, 4 on a continuation
stall (partial results are still written), 5 on an energy-drift abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .continuation import (ContinuationOptions, ContinuationStall,
                           continue_generator, write_generator_csv)
from .dynamics import EquilibriumError, State
from .integrator import (DriftBudgetExceeded, IntegratorOptions, default_step,
                         flow)
from .modal import modal_analysis
from .symmetry import check_spatial_symmetry, point_reflection
from .system import SystemFormatError, load_system

EXIT_BAD_SYSTEM = 2
EXIT_NO_EQUILIBRIUM = 3
EXIT_CONTINUATION_STALL = 4
EXIT_DRIFT_ABORT = 5

SCHEMA_VERSION = 1


def _parse_vector(text, n, what):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise SystemExit(f"cannot parse {what}: {text!r}")
    if len(values) != n:
        raise SystemExit(f"{what} must have {n} comma-separated entries")
    return np.array(values)


def _load(path):
    try:
        return load_system(path)
    except FileNotFoundError:
        print(f"system file not found: {path}", file=_sys.stderr)
        raise SystemExit(EXIT_BAD_SYSTEM)
    except SystemFormatError as exc:
        print(f"bad system file: {exc}", file=_sys.stderr)
        raise SystemExit(EXIT_BAD_SYSTEM)


def _emit_json(payload, out):
    payload = {"schema": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_analyze(args) -> int:
    sys = _load(args.system)
    q_guess = (np.zeros(sys.n) if args.q_guess is None
               else _parse_vector(args.q_guess, sys.n, "--q-guess"))
    try:
        report = modal_analysis(sys, q_guess, eps_int=args.eps_int)
    except EquilibriumError as exc:
        print(f"no equilibrium: {exc}", file=_sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    _emit_json({"system": sys.name, **report.as_dict()}, args.out)
    return 0


def cmd_continue(args) -> int:
    sys = _load(args.system)
    q_guess = (np.zeros(sys.n) if args.q_guess is None
               else _parse_vector(args.q_guess, sys.n, "--q-guess"))
    try:
        report = modal_analysis(sys, q_guess, eps_int=args.eps_int)
    except EquilibriumError as exc:
        print(f"no equilibrium: {exc}", file=_sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    modes = ([int(m) for m in args.mode.split(",")] if args.mode != "all"
             else list(range(1, sys.n + 1)))
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    opts = ContinuationOptions(dt=args.dt, n_steps=args.n_steps,
                               eps_seed=args.eps_seed)

    def run_mode(k):
        stalled = None
        try:
            plus, minus = continue_generator(sys, report, k,
                                             args.energy_max, opts)
        except ContinuationStall as exc:
            stalled = exc
            plus = exc.partial
            minus = None
        written = []
        for gen, tag in ((plus, "plus"), (minus, "minus")):
            if gen is None:
                continue
            path = out_dir / f"generator_mode{k}_{tag}.csv"
            write_generator_csv(gen, path, n=sys.n)
            written.append(str(path))
        return k, stalled, written

    workers = int(os.environ.get("MODALKIT_THREADS", "1") or "1")
    workers = max(1, min(workers, len(modes)))
    results = []
    if workers > 1 and len(modes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_mode, modes))
    else:
        results = [run_mode(k) for k in modes]

    code = 0
    for k, stalled, written in results:
        for path in written:
            print(path)
        if stalled is not None:
            print(f"mode {k} stalled: {stalled}", file=_sys.stderr)
            code = EXIT_CONTINUATION_STALL
    return code


def cmd_simulate(args) -> int:
    sys = _load(args.system)
    q0 = _parse_vector(args.q0, sys.n, "--q0")
    p0 = (np.zeros(sys.n) if args.p0 is None
          else _parse_vector(args.p0, sys.n, "--p0"))
    dt = args.dt
    if dt is None:
        try:
            dt = default_step(sys, q0)
        except (EquilibriumError, ValueError) as exc:
            print(f"cannot derive a default step ({exc}); pass --dt",
                  file=_sys.stderr)
            return EXIT_NO_EQUILIBRIUM
    opts = IntegratorOptions(dt=dt, drift_budget=args.drift_budget)
    try:
        traj = flow(sys, State(q0, p0), args.t_end, opts)
    except DriftBudgetExceeded as exc:
        print(f"energy drift abort: {exc}", file=_sys.stderr)
        return EXIT_DRIFT_ABORT
    out = args.out or "trajectory.csv"
    traj.write_csv(out)
    print(out)
    return 0


def cmd_check_symmetry(args) -> int:
    sys = _load(args.system)
    q_guess = (np.zeros(sys.n) if args.q_guess is None
               else _parse_vector(args.q_guess, sys.n, "--q-guess"))
    try:
        report = modal_analysis(sys, q_guess, eps_int=args.eps_int)
    except EquilibriumError as exc:
        print(f"no equilibrium: {exc}", file=_sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    spec = point_reflection(report.q_bar)
    verdict = check_spatial_symmetry(sys, spec, half_width=args.half_width,
                                     n_samples=args.n_samples,
                                     seed=args.seed)
    _emit_json({"system": sys.name, "q_bar": report.q_bar.tolist(),
                "verdict": verdict.as_dict()}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modalkit",
        description="Modal analysis, brake-orbit continuation, and symmetry "
                    "checks for conservative mechanical systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--system", required=True,
                       help="path to a system definition JSON file")
        p.add_argument("--out", default=None, help="output file or directory")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for sampled checks")
        p.add_argument("--eps-int", type=float, default=1e-6,
                       help="integer-distance tolerance for resonance")
        p.add_argument("--q-guess", default=None,
                       help="equilibrium guess, comma separated")

    p = sub.add_parser("analyze", help="modal analysis at an equilibrium")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("continue", help="continue brake-orbit families")
    common(p)
    p.add_argument("--mode", default="all",
                   help="1-based mode index, comma list, or 'all'")
    p.add_argument("--energy-max", type=float, required=True,
                   help="energy level to continue to (Hamiltonian scale)")
    p.add_argument("--n-steps", type=int, default=20,
                   help="target number of energy steps per branch")
    p.add_argument("--eps-seed", type=float, default=0.05,
                   help="seed amplitude along the mode shape")
    p.add_argument("--dt", type=float, default=None,
                   help="integration step (default: fastest period / 400)")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("simulate", help="integrate from an initial state")
    common(p)
    p.add_argument("--q0", required=True, help="initial configuration")
    p.add_argument("--p0", default=None, help="initial momentum (default 0)")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--drift-budget", type=float, default=1e-6)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-symmetry",
                       help="sampled spatial-symmetry verdict")
    common(p)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--half-width", type=float, default=np.pi / 2,
                   help="sampling box half-width around the equilibrium")
    p.set_defaults(func=cmd_check_symmetry)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
