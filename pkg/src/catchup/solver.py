"""Refinement over a decreasing mesh schedule, Cauchy diagnostics and certification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, DomainError
from .measure import build_partition, lambda_density, nu_mass
from .scheme import (
    DiscreteTrajectory, apriori_bounds, cell_load, check_bounds, density_du,
    density_dv, interpolate, run,
)

DEFAULT_GRID = 512


@dataclass
class Samples:
    """Solution values on the output grid; ``cell`` is the index i of ]t_i, t_{i+1}] holding t."""

    t: np.ndarray
    cell: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    du: np.ndarray
    dl: np.ndarray
    residual: np.ndarray


@dataclass
class Level:
    eps: float
    nodes: int
    max_residual: float
    gap: float = math.nan  # sup gap to the next finer level


@dataclass
class Solution:
    traj: DiscreteTrajectory
    samples: Samples
    levels: list
    bounds: object
    converged: bool
    gap_tol: float
    extra: dict = field(default_factory=dict)

    @property
    def gaps(self):
        return [lv.gap for lv in self.levels[:-1]]

    @property
    def eps(self):
        return self.levels[-1].eps


def level_gap(coarse, fine):
    """max over the fine nodes of |u_c - u_f| + |v_c - v_f| (nodes are nested)."""
    worst = 0.0
    for j, t in enumerate(fine.nodes):
        uc, vc = interpolate(coarse, t)
        worst = max(worst, float(np.linalg.norm(uc - fine.u[j]) + np.linalg.norm(vc - fine.v[j])))
    return worst


def output_grid(partition, n_grid=DEFAULT_GRID):
    """Finest nodes (atoms included) plus a uniform grid of ``n_grid`` points."""
    T = partition.clock.horizon
    extra = [t for t in np.linspace(0.0, T, n_grid) if partition.node_index(t) is None]
    return np.sort(np.concatenate([partition.nodes, np.array(extra, dtype=float)]))


def sample(traj, times):
    P = traj.partition
    n, d = len(times), traj.u.shape[1]
    out = Samples(np.asarray(times, dtype=float), np.empty(n, dtype=int), np.empty((n, d)),
                  np.empty((n, d)), np.empty((n, d)), np.empty((n, d)), np.empty(n), np.empty(n))
    for k, t in enumerate(out.t):
        i = P.cell_right_closed(t)
        out.cell[k] = i
        out.u[k], out.v[k] = interpolate(traj, t)
        out.dv[k] = density_dv(traj, t)
        out.du[k] = density_du(traj, t)
        out.dl[k] = lambda_density(P.clock, t)
        out.residual[k] = traj.residuals[i]
    return out


def solve(scn, grid=DEFAULT_GRID, levels=None):
    """Run the scheme on each mesh of the schedule and return the finest level."""
    if levels is not None:
        scn = scn.with_schedule(levels=int(levels))
    bounds = apriori_bounds(scn)
    out_levels, prev = [], None
    for eps in scn.epsilons:
        P = build_partition(scn.clock, eps)
        traj = run(scn, P)
        check_bounds(traj, bounds)
        if prev is not None:
            out_levels[-1].gap = level_gap(prev, traj)
        out_levels.append(Level(eps, P.q, float(traj.residuals.max(initial=0.0))))
        prev = traj
    samples = sample(prev, output_grid(prev.partition, grid))
    dmax = float(np.linalg.norm(samples.dv, axis=1).max())
    if dmax > bounds.M5:
        raise BoundViolation(f"density norm {dmax:.6g} exceeds M5={bounds.M5:.6g}")
    gap_tol = scn.tolerances["gap"]
    converged = len(out_levels) > 1 and out_levels[-2].gap <= gap_tol
    return Solution(prev, samples, out_levels, bounds, converged, gap_tol)


def rebuild(scn, eps, samples):
    """Reconstruct a :class:`Solution` from exported samples on the partition of ``eps``."""
    P = build_partition(scn.clock, eps)
    d = scn.dim
    u = np.empty((P.q + 1, d))
    v = np.empty((P.q + 1, d))
    found = np.zeros(P.q + 1, dtype=bool)
    for k, t in enumerate(samples.t):
        j = P.node_index(t)
        if j is not None:
            u[j], v[j] = samples.u[k], samples.v[k]
            found[j] = True
    if not found.all():
        missing = P.nodes[~found][0]
        raise DomainError(f"samples do not contain the partition node t={missing!r}")
    loads = np.array([cell_load(scn.f, P, i, u[i], v[i]) for i in range(P.q)]).reshape(P.q, d)
    res = np.array([scn.family.at(P.nodes[i + 1], u[i])
                    .graph_residual(v[i + 1], -(v[i + 1] - v[i] + loads[i]) / P.beta[i])
                    for i in range(P.q)])
    traj = DiscreteTrajectory(P, scn.f, scn.family, u, v, loads, res)
    lv = Level(eps, P.q, float(res.max(initial=0.0)))
    return Solution(traj, samples, [lv], apriori_bounds(scn), False, scn.tolerances["gap"])


# certification ---------------------------------------------------------------

@dataclass
class VIReport:
    rows: list            # per-sample dicts
    ok: bool
    vi_min: float
    vi_t: float
    vi_node_t: float
    vi_tol: float
    domain_max: float
    domain_tol: float
    interp_max: float
    interp_tol: float
    udensity_max: float
    residual_max: float
    limit_vi_min: float
    limit_domain_max: float
    failures: list
    worst_t: float = math.nan       # row with the largest violation relative to its tolerance
    worst_check: str = ""


def verify(sol, scn, z_samples=16, seed=0, tol_vi=None):
    """Check the discrete variational inequality, domain and density conditions.

    For a sample t in the cell ]t_i, t_{i+1}], with w = dv/dnu(t) + f(t, u_i, v_i) dlambda/dnu(t)
    and every sampled z in D(A(t_{i+1}, u_i)), the scheme must satisfy

        <A0(t_{i+1}, u_i) z + w, z - v_{i+1}> >= -tol.

    The same inner product evaluated at the sample's own (t, u(t), v(t)) is
    reported as ``limit_vi_min`` (it tends to the limit inequality as the mesh
    shrinks but carries an O(mesh) defect, so it does not gate ``ok``).
    """
    rng = np.random.default_rng(seed)
    traj, smp = sol.traj, sol.samples
    P, fam, f = traj.partition, scn.family, scn.f
    tol_vi = scn.tolerances["vi"] if tol_vi is None else tol_vi
    smax = float(max(np.linalg.norm(smp.u, axis=1).max(), np.linalg.norm(smp.v, axis=1).max(),
                     np.linalg.norm(traj.v, axis=1).max()))
    dmax = float(np.linalg.norm(smp.dv, axis=1).max())
    vi_tol = tol_vi * (1.0 + dmax + scn.c * (1.0 + 2.0 * smax))
    interp_tol = 1e-9 * (1.0 + smax + dmax)
    dom_tol = scn.tolerances["domain"]

    # discrete density identity u_{i+1} = u_i + beta v_{i+1}
    ud = np.linalg.norm(traj.u[1:] - traj.u[:-1] - P.beta[:, None] * traj.v[1:], axis=1)
    ud_scale = 1e-12 * (1 + np.linalg.norm(traj.u[:-1], axis=1) + P.beta * np.linalg.norm(traj.v[1:], axis=1))
    udensity_max = float(ud.max(initial=0.0))
    ud_ok = bool(np.all(ud <= ud_scale))
    inc_tol = scn.tolerances["inclusion"]

    rows = []
    for k, t in enumerate(smp.t):
        i = int(smp.cell[k])
        theta = P.nodes[i + 1]
        y, ui, vi = traj.v[i + 1], traj.u[i], traj.v[i]
        op = fam.at(theta, ui)
        w = smp.dv[k] + f(t, ui, vi) * smp.dl[k]
        probes = y + (1.0 + np.linalg.norm(y)) * rng.normal(size=(z_samples, scn.dim))
        zs = [op.project_domain(p) for p in probes]
        zs.extend(op.vertices())
        vi_val = np.inf
        if t > P.clock.tol:
            for z in zs:
                vi_val = min(vi_val, float((op.minimal_section(z, tol=1e-6) + w) @ (z - y)))
        dom = op.domain_distance(y)
        u_re, v_re = interpolate(traj, t)
        dv_re = density_dv(traj, t)
        interp = float(max(np.linalg.norm(u_re - smp.u[k]), np.linalg.norm(v_re - smp.v[k]),
                           np.linalg.norm(dv_re - smp.dv[k])))
        # the same inequality at the sample's own state
        op_t = fam.at(t, smp.u[k])
        w_t = smp.dv[k] + f(t, smp.u[k], smp.v[k]) * smp.dl[k]
        lim = np.inf
        if t > P.clock.tol:
            for p in probes:
                z = op_t.project_domain(p)
                lim = min(lim, float((op_t.minimal_section(z, tol=1e-6) + w_t) @ (z - smp.v[k])))
        rows.append({
            "t": float(t), "node_t": float(theta), "cell": i,
            "vi_min": vi_val, "domain_distance": float(dom), "interp_gap": interp,
            "residual": float(traj.residuals[i]), "limit_vi_min": lim,
            "limit_domain_distance": float(op_t.domain_distance(smp.v[k])),
            "u_density_defect": float(ud[i]),
        })
        r = rows[-1]
        r["severity"] = {
            "vi": max(0.0, -vi_val) / vi_tol if np.isfinite(vi_val) else 0.0,
            "domain": r["domain_distance"] / dom_tol,
            "interpolant": interp / interp_tol,
            "u_density": float(ud[i] / ud_scale[i]),
            "residual": r["residual"] / inc_tol,
        }

    vi_vals = np.array([r["vi_min"] for r in rows])
    kmin = int(np.argmin(vi_vals))
    domain_max = max(r["domain_distance"] for r in rows)
    interp_max = max(r["interp_gap"] for r in rows)
    residual_max = float(traj.residuals.max(initial=0.0))
    failures = []
    if vi_vals[kmin] < -vi_tol:
        failures.append(f"variational inequality violated: {vi_vals[kmin]:.3e} at t={rows[kmin]['t']:.17g}")
    if domain_max > dom_tol:
        kd = max(range(len(rows)), key=lambda j: rows[j]["domain_distance"])
        failures.append(f"velocity outside the domain by {domain_max:.3e} at t={rows[kd]['t']:.17g}")
    if interp_max > interp_tol:
        ki = max(range(len(rows)), key=lambda j: rows[j]["interp_gap"])
        failures.append(f"samples inconsistent with the iterates by {interp_max:.3e} at t={rows[ki]['t']:.17g}")
    if not ud_ok:
        failures.append("discrete u-density identity violated")
    if residual_max > inc_tol:
        failures.append(f"cell inclusion residual {residual_max:.3e}")
    worst_k, worst_check, worst_sev = 0, "", 0.0
    for k, r in enumerate(rows):
        sev = r.pop("severity")
        name = max(sev, key=sev.get)
        r["ok"] = sev[name] <= 1.0
        if sev[name] > worst_sev:
            worst_k, worst_check, worst_sev = k, name, sev[name]
    if worst_sev <= 1.0:
        worst_check = ""
    finite_lim = [r["limit_vi_min"] for r in rows if np.isfinite(r["limit_vi_min"])]
    return VIReport(
        rows=rows, ok=not failures,
        vi_min=float(vi_vals[kmin]), vi_t=rows[kmin]["t"], vi_node_t=rows[kmin]["node_t"], vi_tol=vi_tol,
        domain_max=domain_max, domain_tol=dom_tol, interp_max=interp_max, interp_tol=interp_tol,
        udensity_max=udensity_max, residual_max=residual_max,
        limit_vi_min=min(finite_lim) if finite_lim else math.inf,
        limit_domain_max=max(r["limit_domain_distance"] for r in rows),
        failures=failures, worst_t=rows[worst_k]["t"] if worst_check else math.nan,
        worst_check=worst_check,
    )


# convergence study -----------------------------------------------------------

@dataclass
class StudyRow:
    eps: float
    nodes: int
    gap_ref: float   # sup gap to the finest level
    gap_next: float  # sup gap to the next level
    order: object    # float, "exact", or None on the first row


def _masked_gap(coarse, fine, keep):
    worst = 0.0
    for j, t in enumerate(fine.nodes):
        if not keep(t):
            continue
        uc, vc = interpolate(coarse, t)
        worst = max(worst, float(np.linalg.norm(uc - fine.u[j]) + np.linalg.norm(vc - fine.v[j])))
    return worst


def convergence_study(scn, atom_window=None):
    """Sup gaps per level and empirical orders from successive Cauchy gaps.

    With atoms present, nodes within ``atom_window`` (default: the first
    mesh size) after each atom are left out of the gaps.
    """
    eps_list = scn.epsilons
    if len(eps_list) < 3:
        raise DomainError("a convergence study needs at least 3 levels")
    trajs = [run(scn, build_partition(scn.clock, e)) for e in eps_list]
    atoms = [a.t for a in scn.clock.atoms]
    window = eps_list[0] if atom_window is None else atom_window

    def keep(t):
        return all(not (a - scn.clock.tol <= t < a + window) for a in atoms)

    ref = trajs[-1]
    scale = 1.0 + float(np.abs(ref.u).max() + np.abs(ref.v).max())
    exact_tol = 1e-12 * scale * max(1, ref.partition.q)
    rows = []
    for k in range(len(trajs) - 1):
        gref = _masked_gap(trajs[k], ref, keep)
        gnext = gref if k + 1 == len(trajs) - 1 else _masked_gap(trajs[k], trajs[k + 1], keep)
        rows.append(StudyRow(eps_list[k], trajs[k].partition.q, gref, gnext, None))
    for k in range(1, len(rows)):
        a, b = rows[k - 1].gap_next, rows[k].gap_next
        if a <= exact_tol and b <= exact_tol:
            rows[k].order = "exact"
        elif b > 0 and a > 0:
            rows[k].order = math.log(a / b) / math.log(eps_list[k - 1] / eps_list[k])
        else:
            rows[k].order = math.inf
    if len(rows) > 1 and rows[1].order == "exact":
        rows[0].order = "exact"
    return rows
