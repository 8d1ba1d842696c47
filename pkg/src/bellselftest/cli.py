"""Command-line workflows: protocol synthesis, simulation, verification,
Bell-expression bounds and membership tests, plus two reproducible demos.

Exit codes: 0 pass/feasible, 1 fail/infeasible, 2 structural error.  All file
outputs are deterministic (sorted keys, 17-significant-digit floats) so reruns
are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import _jsonio, hardy, scenario, selftest, tree
from .npa import membership as npa_membership
from .npa import moments, seesaw
from .npa.sdp import SolverConfig, Status
from .scenario import (
    CHSH_SHAPE,
    SINGLE_SOURCE_CHSH_SHAPE,
    Realization,
    ScenarioShape,
    behavior_of,
    observed,
)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class StructuralError(ValueError):
    """Bad inputs (schema violations, invalid parameter ranges)."""


def _num_threads() -> int:
    raw = os.environ.get("SELFTEST_NUM_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise StructuralError(f"SELFTEST_NUM_THREADS={raw!r} is not an integer") from exc
    return min(4, os.cpu_count() or 1)


def _sweep(fn, items):
    """Deterministic parallel map: worker count capped by SELFTEST_NUM_THREADS,
    results collected in input order."""
    n = _num_threads()
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def _parse_coeffs(text: str) -> np.ndarray:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            vals.append(float(Fraction(part)))
        except (ValueError, ZeroDivisionError) as exc:
            raise StructuralError(f"bad coefficient {part!r}") from exc
    if len(vals) < 2:
        raise StructuralError("need at least two coefficients")
    return np.array(vals)


def _check_w(w: float) -> float:
    if not (-0.25 < w < 1.0):
        raise StructuralError(f"w = {w} outside (-1/4, 1)")
    return w


def _check_bounds(lo, up):
    if lo is None and up is None:
        return None
    if lo is None or up is None:
        raise StructuralError("provide both --l and --u or neither")
    if not (0.0 < lo <= up < 1.0):
        raise StructuralError(f"need 0 < l <= u < 1, got l={lo}, u={up}")
    return (float(lo), float(up))


def _check_level(level: int) -> int:
    if not 1 <= level <= 3:
        raise StructuralError(f"level must be in [1, 3], got {level}")
    return level


_REQUIRED_KEYS = {
    "realization.v1": ("shape", "dims", "states", "alice", "bob"),
    "protocol.v1": ("d", "coeffs", "root", "edges", "perEdge", "compressedGroups"),
    "observed.v1": ("shape", "table"),
    "behavior.v1": ("shape", "tensor"),
}


def _load_json(path: str, expect_version: str | None = None) -> dict:
    try:
        obj = _jsonio.load(path)
    except FileNotFoundError as exc:
        raise StructuralError(f"no such file: {path}") from exc
    except ValueError as exc:
        raise StructuralError(f"{path}: not valid JSON ({exc})") from exc
    if expect_version:
        if obj.get("version") != expect_version:
            raise StructuralError(
                f"{path}: /version is {obj.get('version')!r}, "
                f"expected {expect_version!r}")
        for key in _REQUIRED_KEYS.get(expect_version, ()):
            if key not in obj:
                raise StructuralError(f"{path}: /{key} is missing")
    return obj


def _write_json(obj, path: str | None) -> None:
    if path:
        _jsonio.dump(obj, path)
    else:
        print(_jsonio.dumps(obj))


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.8f}" if isinstance(v, float) else v for v in row])


def read_csv(path: str) -> tuple[list, list]:
    """Read back a demo CSV: header plus float-typed rows where possible."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return header, rows


# ---------------------------------------------------------------- subcommands

def cmd_protocol(args) -> int:
    coeffs = _parse_coeffs(args.coeffs)
    try:
        sv = tree.SchmidtVector(coeffs)
        proto = tree.protocol_of(sv)
    except tree.MaximallyEntangledError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"covering tree rooted at {proto.tree.root}, edges:")
    print("  " + ", ".join(str(e) for e in proto.tree.edges))
    print(f"{'edge':>10} {'w':>12} {'theta':>12} {'p':>12} {'swapped':>8}")
    for et in proto.per_edge:
        print(f"{str(et.edge):>10} {et.w:12.8f} {et.theta:12.8f} "
              f"{et.p:12.8f} {str(et.swapped):>8}")
    print("compressed groups: " + "; ".join(str(list(g)) for g in proto.groups))
    if args.out:
        _jsonio.dump(proto.to_json(), args.out)
    return EXIT_PASS


def cmd_simulate(args) -> int:
    r = Realization.from_json(_load_json(args.realization, "realization.v1"))
    r.validate()
    beh = behavior_of(r)
    beh.validate()
    if args.out_behavior:
        _jsonio.dump(beh.to_json(), args.out_behavior)
    if args.out_observed:
        obs = observed(beh)
        _jsonio.dump(obs.to_json(), args.out_observed)
    if not args.out_behavior and not args.out_observed:
        print(_jsonio.dumps(beh.to_json()))
    return EXIT_PASS


def cmd_verify(args) -> int:
    r = Realization.from_json(_load_json(args.realization, "realization.v1"))
    if (args.protocol is None) == (args.w is None):
        raise StructuralError("provide exactly one of --protocol or --w")
    if args.protocol:
        proto = tree.QuditProtocol.from_json(_load_json(args.protocol, "protocol.v1"))
        report = selftest.verify_qudit(r, proto, tol=args.tol)
    else:
        report = selftest.verify_qubit(r, _check_w(args.w), tol=args.tol)
    _write_json(report.to_json(), args.out)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _problem_from_spec(obj: dict) -> moments.MomentProblem:
    shape = ScenarioShape.from_json(obj["shape"])
    level = _check_level(int(obj["level"]))
    basis = moments.MomentBasis(shape, level)
    weights = obj.get("weights")
    if weights is not None:
        weights = {tuple(int(v) for v in k.split(",")): float(w)
                   for k, w in weights.items()}
    objective = moments.zero_expr()
    for event, coeff in obj.get("objective", []):
        s, t, a, b, x, y = (int(v) for v in event)
        objective = objective + float(coeff) * basis.prob_expr(s, t, a, b, x, y)
    value_constraints = []
    for terms, const in obj.get("valueConstraints", []):
        expr = moments.zero_expr()
        for event, coeff in terms:
            s, t, a, b, x, y = (int(v) for v in event)
            expr = expr + float(coeff) * basis.prob_expr(s, t, a, b, x, y)
        value_constraints.append((expr, float(const)))
    bounds = obj.get("residualBounds")
    return moments.build_moment_problem(
        shape, level, weights=weights,
        zeros=[tuple(int(v) for v in z) for z in obj.get("zeros", [])],
        value_constraints=value_constraints, objective=objective,
        residual_bounds=None if bounds is None else tuple(bounds))


def _preset_problem(name: str, w: float | None, level: int,
                    bounds) -> moments.MomentProblem:
    if name == "chsh":
        if bounds is None:
            shape = SINGLE_SOURCE_CHSH_SHAPE
            basis = moments.MomentBasis(shape, level)
            obj = moments.zero_expr()
            for x in range(2):
                for y in range(2):
                    sgn = -1.0 if x * y else 1.0
                    obj = obj + 0.25 * sgn * moments.correlator_expr(basis, 0, 0, x, y)
            return moments.build_moment_problem(shape, level, weights={(0, 0): 1.0},
                                                objective=obj)
        shape = CHSH_SHAPE
        basis = moments.MomentBasis(shape, level)
        obj = moments.chsh_objective(basis)
        return moments.build_moment_problem(shape, level, weights=None,
                                            objective=obj, residual_bounds=bounds)
    if name == "tilted-hardy":
        if w is None:
            raise StructuralError("preset tilted-hardy needs --w")
        w = _check_w(w)
        if bounds is None:
            shape = SINGLE_SOURCE_CHSH_SHAPE
            basis = moments.MomentBasis(shape, level)
            return moments.build_moment_problem(
                shape, level, weights={(0, 0): 1.0},
                zeros=moments.hardy_zero_events(shape),
                objective=moments.tilted_hardy_objective(basis, w))
        shape = CHSH_SHAPE
        basis = moments.MomentBasis(shape, level)
        weights = {(s, t): 0.25 for s in range(2) for t in range(2)}
        return moments.build_moment_problem(
            shape, level, weights=weights,
            zeros=moments.hardy_zero_events(shape),
            objective=moments.tilted_hardy_objective(basis, w),
            residual_bounds=bounds)
    raise StructuralError(f"unknown preset {name!r}")


def cmd_bound(args) -> int:
    level = _check_level(args.level)
    bounds = _check_bounds(args.l, args.u)
    if (args.preset is None) == (args.problem is None):
        raise StructuralError("provide exactly one of --preset or --problem")
    if args.problem:
        problem = _problem_from_spec(_load_json(args.problem))
    else:
        problem = _preset_problem(args.preset, args.w, level, bounds)
    config = SolverConfig(tol_feas=args.tol, tol_gap=args.tol)
    sol = moments.solve_sdp(problem, config)
    if sol.status is not Status.OPTIMAL:
        print(f"solver status: {sol.status.value}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{sol.value:.8f}")
    if args.out:
        payload = {"problem": problem.to_json(), "solution": sol.to_json()}
        _jsonio.dump(payload, args.out)
    return EXIT_PASS


def cmd_membership(args) -> int:
    obs = scenario.ObservedBehavior.from_json(_load_json(args.observed, "observed.v1"))
    level = _check_level(args.level)
    bounds = _check_bounds(args.l, args.u)
    config = SolverConfig(tol_feas=args.tol, tol_gap=args.tol)
    result = npa_membership.membership_test(obs, level, residual_bounds=bounds,
                                            config=config)
    print(result.status.value)
    if result.status is npa_membership.MembershipStatus.INFEASIBLE:
        if args.certificate_out and result.certificate is not None:
            _jsonio.dump(result.certificate.to_json(), args.certificate_out)
        return EXIT_FAIL
    if result.status is npa_membership.MembershipStatus.UNKNOWN:
        return EXIT_ERROR
    return EXIT_PASS


def _demo_chsh(args) -> int:
    offs = np.linspace(-0.3, 0.3, args.grid)
    beta = np.pi / 4

    def row(off):
        alpha = np.pi / 4 + off
        r = scenario.chsh_counterexample(alpha, beta)
        beh = behavior_of(r)
        lo, up = scenario.residual_bounds(beh)
        dist = scenario.trace_distance(r.cq.states[(0, 0)], r.cq.states[(1, 1)])
        return [float(alpha), scenario.chsh_value(beh), lo, up, dist]

    rows = _sweep(row, list(offs))
    path = os.path.join(args.out, "chsh_counterexample.csv")
    _write_csv(path, ["alpha", "chshValue", "l", "u", "traceDistance_rho00_rho11"], rows)
    print(f"wrote {path}")
    return EXIT_PASS


def _demo_hardy(args) -> int:
    ws = [-0.2, 0.0, 0.25, 0.5, 0.75] if args.w_grid is None \
        else [float(v) for v in args.w_grid.split(",")]

    def row(w):
        _check_w(w)
        r = hardy.canonical_realization(w, seed=args.seed)
        beh = behavior_of(r)
        test = hardy.TiltedHardyTest.for_w(w)
        rep = hardy.check_conditions(beh, (0, 0), test)
        vrep = selftest.verify_qubit(r, w)
        ss = seesaw.seesaw_tilted_hardy(w, restarts=10, iters=60, seed=args.seed)
        shape = SINGLE_SOURCE_CHSH_SHAPE
        basis = moments.MomentBasis(shape, 2)
        bound, _ = moments.max_value(
            shape, 2, moments.tilted_hardy_objective(basis, w),
            zeros=moments.hardy_zero_events(shape), weights={(0, 0): 1.0})
        ok = rep.passed and vrep.passed
        return [float(w), hardy.q_of_w(w), ss.value, bound, "true" if ok else "false"]

    rows = _sweep(row, ws)
    path = os.path.join(args.out, "hardy_selftest.csv")
    _write_csv(path, ["w", "qFormula", "seesaw", "sdpBound", "pass"], rows)
    print(f"wrote {path}")
    return EXIT_PASS


def cmd_demo(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.name == "chsh-counterexample":
        return _demo_chsh(args)
    if args.name == "hardy-selftest":
        return _demo_hardy(args)
    raise StructuralError(f"unknown demo {args.name!r}")


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellselftest",
        description="Self-testing protocols for Bell scenarios with untrusted sources")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("protocol", help="synthesize a qudit self-testing protocol")
    p.add_argument("--coeffs", required=True,
                   help="comma-separated Schmidt coefficients (fractions allowed)")
    p.add_argument("--out", help="write protocol.v1 JSON here")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("simulate", help="behavior tensor of a realization file")
    p.add_argument("--realization", required=True)
    p.add_argument("--out-behavior")
    p.add_argument("--out-observed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="verify a realization against a protocol")
    p.add_argument("--realization", required=True)
    p.add_argument("--protocol", help="protocol.v1 JSON (qudit verification)")
    p.add_argument("--w", type=float, help="tilted Hardy parameter (qubit verification)")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--out", help="write report.v1 JSON here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="SDP upper bound on a Bell expression")
    p.add_argument("--preset", choices=["chsh", "tilted-hardy"])
    p.add_argument("--problem", help="problem spec JSON")
    p.add_argument("--w", type=float)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--l", type=float, default=None)
    p.add_argument("--u", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="write sdp.v1 problem/solution dump here")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("membership", help="quantum membership of an observed table")
    p.add_argument("--observed", required=True)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--l", type=float, default=None)
    p.add_argument("--u", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--certificate-out")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("demo", help="reproducible demo sweeps with CSV artifacts")
    p.add_argument("name", choices=["chsh-counterexample", "hardy-selftest"])
    p.add_argument("--out", default="demo-out")
    p.add_argument("--grid", type=int, default=13)
    p.add_argument("--w-grid", default=None,
                   help="comma-separated w values for hardy-selftest")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
