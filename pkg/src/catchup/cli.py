"""Command line: ``catchup {solve,verify,study,validate} SCENARIO [options]``.

Exit codes: 0 success, 1 parse/validation/bound error or missing artifacts,
2 not converged at schedule end, 3 certification failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import BoundViolation, DomainError, ValidationError
from .scenario import load, validate
from .solver import DEFAULT_GRID, Samples, convergence_study, rebuild, solve, verify

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_UNCERTIFIED = 0, 1, 2, 3
BOUND_NAMES = ("m1", "c1", "gamma1", "m2", "m3", "m4", "M", "M1", "M2", "M3", "M4", "M5")


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def trajectory_header(d):
    return (["t", "cell"] + [f"u_{j}" for j in range(d)] + [f"v_{j}" for j in range(d)]
            + [f"dv_{j}" for j in range(d)] + ["dlambda_dnu", "residual"])


def write_trajectory(path, samples):
    d = samples.u.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(d))
        for k in range(len(samples.t)):
            w.writerow([fmt(samples.t[k]), fmt(samples.cell[k])]
                       + [fmt(x) for x in samples.u[k]] + [fmt(x) for x in samples.v[k]]
                       + [fmt(x) for x in samples.dv[k]] + [fmt(samples.dl[k]), fmt(samples.residual[k])])


def read_trajectory(path, d):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != trajectory_header(d):
        raise DomainError(f"{path}: unexpected header for dimension {d}")
    a = np.array([[float(x) for x in r] for r in rows[1:]])
    if a.ndim != 2 or a.shape[0] == 0:
        raise DomainError(f"{path}: no rows")
    u, v, dv = a[:, 2:2 + d], a[:, 2 + d:2 + 2 * d], a[:, 2 + 2 * d:2 + 3 * d]
    # du/dnu is not exported; it equals the next iterate of v and is rebuilt by verify
    return Samples(a[:, 0], a[:, 1].astype(int), u, v, dv, np.full_like(u, np.nan), a[:, -2], a[:, -1])


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (int, float, np.floating, np.integer)) else x for x in r])


def write_diagnostics(path, sol, report):
    rows = []
    for k, lv in enumerate(sol.levels):
        rows += [("eps", k, lv.eps), ("nodes", k, lv.nodes), ("max_residual", k, lv.max_residual)]
        if k < len(sol.levels) - 1:
            rows.append(("gap", k, lv.gap))
    for name in BOUND_NAMES:
        rows.append((name, "", getattr(sol.bounds, name)))
    rows += [("converged", "", int(sol.converged)), ("vi_min", "", report.vi_min),
             ("vi_t", "", report.vi_t), ("vi_node_t", "", report.vi_node_t), ("vi_tol", "", report.vi_tol),
             ("domain_max", "", report.domain_max), ("limit_vi_min", "", report.limit_vi_min),
             ("limit_domain_max", "", report.limit_domain_max), ("certified", "", int(report.ok))]
    write_rows(path, ["quantity", "index", "value"], rows)


def read_finest_eps(path):
    eps = None
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            if r["quantity"] == "eps":
                eps = float(r["value"])
    if eps is None:
        raise DomainError(f"{path}: no eps rows")
    return eps


VI_HEADER = ["t", "node_t", "cell", "vi_min", "domain_distance", "interp_gap", "residual",
             "u_density_defect", "limit_vi_min", "limit_domain_distance", "ok"]


def write_vi_report(path, report):
    write_rows(path, VI_HEADER, [[r[k] for k in VI_HEADER] for r in report.rows])


def summary_text(scn, sol, report):
    lines = [f"scenario: {scn.name or '(unnamed)'}", f"dimension: {scn.dim}  horizon: {scn.horizon:g}"]
    if sol.converged:
        lines.append(f"status: converged (final gap {sol.levels[-2].gap:.3e} <= {sol.gap_tol:g})")
    else:
        last = sol.levels[-2].gap if len(sol.levels) > 1 else math.nan
        lines.append(f"status: not converged at schedule end (final gap {last:.3e}, tolerance {sol.gap_tol:g})")
    lines.append("levels:")
    for lv in sol.levels:
        gap = "" if math.isnan(lv.gap) else f"  gap {lv.gap:.3e}"
        lines.append(f"  eps {lv.eps:.6g}  nodes {lv.nodes}  max residual {lv.max_residual:.2e}{gap}")
    lines.append("a priori constants: " + ", ".join(f"{n}={getattr(sol.bounds, n):.4g}" for n in BOUND_NAMES))
    lines.append(f"certificate: {'pass' if report.ok else 'FAIL'}; worst VI {report.vi_min:.3e} at t={report.vi_t:.6g} "
                 f"(tolerance {report.vi_tol:.3e}); max domain distance {report.domain_max:.2e}")
    for msg in report.failures:
        lines.append(f"  {msg}")
    return "\n".join(lines) + "\n"


def _load_valid(path, seed):
    scn = load(path)
    validate(scn, seed=seed, strict=True)
    return scn


def cmd_solve(path, out_dir, grid=DEFAULT_GRID, levels=None, seed=0, tol_vi=None):
    try:
        scn = _load_valid(path, seed)
        sol = solve(scn, grid=grid, levels=levels)
    except (ValidationError, BoundViolation, DomainError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = verify(sol, scn, seed=seed, tol_vi=tol_vi)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory(out / "trajectory.csv", sol.samples)
    write_diagnostics(out / "diagnostics.csv", sol, report)
    (out / "summary.txt").write_text(summary_text(scn, sol, report))
    print(summary_text(scn, sol, report), end="")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_verify(path, solution_dir, seed=0, tol_vi=None):
    try:
        scn = load(path)
    except ValidationError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sdir = Path(solution_dir)
    traj_path, diag_path = sdir / "trajectory.csv", sdir / "diagnostics.csv"
    for p in (traj_path, diag_path):
        if not p.is_file():
            print(f"missing artifact {p}", file=sys.stderr)
            return EXIT_INVALID
    try:
        samples = read_trajectory(traj_path, scn.dim)
        sol = rebuild(scn, read_finest_eps(diag_path), samples)
    except (DomainError, ValueError) as exc:
        print(f"{solution_dir}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = verify(sol, scn, seed=seed, tol_vi=tol_vi)
    write_vi_report(sdir / "vi_report.csv", report)
    status = "pass" if report.ok else "FAIL"
    print(f"certificate: {status}; worst VI {report.vi_min:.6e} at t={report.vi_t:.17g} "
          f"(cell node {report.vi_node_t:.17g}, tolerance {report.vi_tol:.3e})")
    for msg in report.failures:
        print(f"  {msg}")
    if report.worst_check:
        print(f"worst row: t={report.worst_t:.17g} ({report.worst_check})")
    return EXIT_OK if report.ok else EXIT_UNCERTIFIED


def cmd_study(path, out_dir, levels=None):
    try:
        scn = load(path)
        if levels is not None:
            scn = scn.with_schedule(levels=int(levels))
        rows = convergence_study(scn)
    except (ValidationError, DomainError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = [[r.eps, r.nodes, r.gap_ref, r.gap_next,
              "" if r.order is None else (r.order if isinstance(r.order, str) else fmt(r.order))]
             for r in rows]
    write_rows(out / "orders.csv", ["eps", "nodes", "gap_ref", "gap_next", "order"], table)
    for r in table:
        print("  ".join(str(x) if isinstance(x, str) else f"{x:.6g}" for x in r))
    return EXIT_OK


def cmd_validate(path, seed=0):
    try:
        scn = load(path)
    except ValidationError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = validate(scn, seed=seed, strict=False)
    bad = [r for r in report if not r[1]]
    for tag, ok, msg in report:
        if not ok:
            print(f"({tag}) FAIL: {msg}")
    print(f"{len(report) - len(bad)}/{len(report)} checks passed")
    return EXIT_INVALID if bad else EXIT_OK


def _dispatch(verb, path, out, opts):
    if verb == "solve":
        return cmd_solve(path, out, grid=opts["grid"], levels=opts["levels"], seed=opts["seed"],
                         tol_vi=opts["tol_vi"])
    if verb == "verify":
        return cmd_verify(path, out, seed=opts["seed"], tol_vi=opts["tol_vi"])
    if verb == "study":
        return cmd_study(path, out, levels=opts["levels"])
    return cmd_validate(path, seed=opts["seed"])


def build_parser():
    p = argparse.ArgumentParser(prog="catchup", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=["solve", "verify", "study", "validate"])
    p.add_argument("scenario", help="scenario file, or a directory of *.json scenarios")
    p.add_argument("--out", default="out", help="output directory (for verify: the solution directory)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="uniform output points (default 512)")
    p.add_argument("--tol-vi", type=float, default=None, help="VI tolerance before scaling")
    p.add_argument("--levels", type=int, default=None, help="override the number of schedule levels")
    p.add_argument("--jobs", type=int, default=1, help="workers when given a directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    opts = {"grid": args.grid, "levels": args.levels, "seed": args.seed, "tol_vi": args.tol_vi}
    path = Path(args.scenario)
    if not path.exists():
        print(f"no such scenario: {path}", file=sys.stderr)
        return EXIT_INVALID
    if not path.is_dir():
        return _dispatch(args.verb, path, args.out, opts)
    files = sorted(path.glob("*.json"))
    jobs = [(args.verb, f, Path(args.out) / f.stem, opts) for f in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            codes = list(ex.map(_dispatch, *zip(*jobs)))
    else:
        codes = [_dispatch(*j) for j in jobs]
    return max(codes, default=EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
