"""Catching-up discretization of -dv/dnu in A(t, u) v + f(t, u, v) dlambda/dnu.

On the cell ]t_i, t_{i+1}] with nu-mass beta the scheme reads

    F     = int_{t_i}^{t_{i+1}} f(s, u_i, v_i) ds
    v_i+1 = (I + beta A(t_{i+1}, u_i))^{-1} (v_i - F)
    u_i+1 = u_i + beta v_i+1

and the step is certified by the graph residual of
-(v_{i+1} - v_i + F) / beta in A(t_{i+1}, u_i) v_{i+1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundViolation, DomainError
from .measure import lambda_density, nu_mass


def adaptive_simpson(g, a, b, abs_tol, max_depth=40):
    """Vector-valued adaptive Simpson quadrature of g over [a, b]."""
    fa, fm, fb = g(a), g(0.5 * (a + b)), g(b)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    return _simpson_rec(g, a, b, fa, fm, fb, whole, abs_tol, max_depth)


def _simpson_rec(g, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = g(lm), g(rm)
    left = (m - a) / 6.0 * (fa + 4 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4 * frm + fb)
    diff = left + right - whole
    if depth <= 0 or np.max(np.abs(diff)) <= 15 * tol:
        return left + right + diff / 15.0
    return (_simpson_rec(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_rec(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def integrate_frozen(f, a, b, u, v):
    """int_a^b f(s, u, v) ds with (u, v) frozen."""
    if b <= a:
        return np.zeros_like(u, dtype=float)
    f0 = f(a, u, v)
    if not f.time_dependent:
        return (b - a) * f0
    tol = 1e-12 * (1.0 + np.linalg.norm(f0)) * (b - a)
    return adaptive_simpson(lambda s: f(s, u, v), a, b, tol)


def cell_load(f, partition, i, u_i, v_i):
    """F_{i+1}: the load of cell ]t_i, t_{i+1}] with the state frozen at (u_i, v_i)."""
    return integrate_frozen(f, partition.nodes[i], partition.nodes[i + 1], u_i, v_i)


def catch_up_step(family, partition, i, u_i, v_i, F):
    """One resolvent step on cell i; returns (u_next, v_next, residual)."""
    beta = partition.beta[i]
    if not beta > 0:
        raise DomainError("cell with zero nu-mass")
    op = family.at(partition.nodes[i + 1], u_i)
    v_next = op.resolvent(beta, v_i - F)
    u_next = u_i + beta * v_next
    residual = op.graph_residual(v_next, -(v_next - v_i + F) / beta)
    return u_next, v_next, residual


@dataclass(frozen=True)
class DiscreteTrajectory:
    partition: object
    f: object
    family: object
    u: np.ndarray          # (q + 1, d)
    v: np.ndarray          # (q + 1, d)
    loads: np.ndarray      # (q, d); loads[i] belongs to cell ]t_i, t_{i+1}]
    residuals: np.ndarray  # (q,)

    @property
    def clock(self):
        return self.partition.clock

    @property
    def nodes(self):
        return self.partition.nodes


def run(scn, partition, inclusion_tol=None):
    """Induction over all cells of the partition."""
    fam, f = scn.family, scn.f
    dd = fam.at(0.0, scn.u0).domain_distance(scn.v0)
    if dd > scn.tolerances["domain"]:
        raise DomainError(f"v0 is at distance {dd:.3e} from D(A(0, u0))")
    q, d = partition.q, scn.dim
    u = np.empty((q + 1, d))
    v = np.empty((q + 1, d))
    loads = np.empty((q, d))
    res = np.empty(q)
    u[0], v[0] = scn.u0, scn.v0
    for i in range(q):
        F = cell_load(f, partition, i, u[i], v[i])
        u[i + 1], v[i + 1], res[i] = catch_up_step(fam, partition, i, u[i], v[i], F)
        loads[i] = F
    return DiscreteTrajectory(partition, f, fam, u, v, loads, res)


def interpolate(traj, t):
    """(u_n(t), v_n(t)) of the BVRC interpolants built from the iterates."""
    P = traj.partition
    P.clock._check(t)
    i = P.cell_left_closed(t)
    if i >= P.q:
        return traj.u[-1].copy(), traj.v[-1].copy()
    ti = P.nodes[i]
    if abs(t - ti) <= P.clock.tol:
        return traj.u[i].copy(), traj.v[i].copy()
    w = nu_mass(P.clock, ti, t) / P.beta[i]
    u = traj.u[i] + w * (traj.u[i + 1] - traj.u[i])
    v = (traj.v[i] + w * (traj.v[i + 1] - traj.v[i] + traj.loads[i])
         - integrate_frozen(traj.f, ti, t, traj.u[i], traj.v[i]))
    return u, v


def density_dv(traj, t):
    """dv_n/dnu(t) on the cell ]t_i, t_{i+1}] containing t."""
    P = traj.partition
    i = P.cell_right_closed(t)
    B = (traj.v[i + 1] - traj.v[i] + traj.loads[i]) / P.beta[i]
    dl = lambda_density(P.clock, t)
    if dl == 0.0:
        return B
    return B - traj.f(t, traj.u[i], traj.v[i]) * dl


def density_du(traj, t):
    """du_n/dnu(t) = (u_{i+1} - u_i) / beta_{i+1}, equal to v_{i+1}."""
    P = traj.partition
    i = P.cell_right_closed(t)
    return (traj.u[i + 1] - traj.u[i]) / P.beta[i]


def gronwall_bound(alpha, beta, gamma, a0):
    """Closed-form majorant of a_{i+1} <= alpha_i + beta_i (a_0+...+a_{i-1}) + (1+gamma_i) a_i.

    Returns the bounds for a_0, ..., a_n:
    (a0 + sum_{k<j} alpha_k) * exp(sum_{k<j} (k beta_k + gamma_k)).
    """
    alpha, beta, gamma = (np.asarray(x, dtype=float) for x in (alpha, beta, gamma))
    if not (alpha.shape == beta.shape == gamma.shape) or alpha.ndim != 1:
        raise DomainError("alpha, beta, gamma must be 1-d sequences of equal length")
    if a0 < 0 or np.any(alpha < 0) or np.any(beta < 0) or np.any(gamma < 0):
        raise DomainError("Gronwall inputs must be nonnegative")
    n = len(alpha)
    k = np.arange(n)
    head = a0 + np.concatenate([[0.0], np.cumsum(alpha)])
    expo = np.concatenate([[0.0], np.cumsum(k * beta + gamma)])
    # round outward: when the recursion is tight to first order, the closed
    # form evaluated in floating point could otherwise land an ulp below it
    inflate = np.where((expo > 0) | (head > a0), 1.0 + 4.0 * (n + 2) * np.finfo(float).eps, 1.0)
    with np.errstate(over="ignore"):
        return head * np.exp(expo) * inflate


@dataclass(frozen=True)
class AprioriBounds:
    m1: float
    c1: float
    gamma1: float
    m2: float
    m3: float
    m4: float
    M: float
    M1: float
    M2: float
    M3: float
    M4: float
    M5: float


def apriori_bounds(scn):
    """Constants of the a priori estimates on iterates and densities.

    ``m2`` is the larger of the textbook constant
    (|v0| + (m1+c1)(1+|u0|)T) exp((2+T) m1 + 2 c1 + gamma1) and a majorant
    valid for any partition, (|v0| + (m1+c1)(1+|u0|)V) exp((m1+c1)(V + V^2/2) + gamma1 V),
    where V = nu(]0, T]) counts the atoms too.
    """
    m, c, g = scn.m, scn.c, scn.gamma
    T = scn.horizon
    V = nu_mass(scn.clock, 0.0, T)
    nu0, nv0 = float(np.linalg.norm(scn.u0)), float(np.linalg.norm(scn.v0))
    m1 = m + 1.0
    c1 = 1.5 * (1.0 + c)
    g1 = 2.0 * g
    with np.errstate(over="ignore"):
        m2_text = (nv0 + (m1 + c1) * (1 + nu0) * T) * np.exp((2 + T) * m1 + 2 * c1 + g1)
        m2_any = (nv0 + (m1 + c1) * (1 + nu0) * V) * np.exp((m1 + c1) * (V + 0.5 * V * V) + g1 * V)
    m2 = float(max(m2_text, m2_any))
    m3 = (m1 + c1) * (1 + nu0 + m2 * V + m2)
    m4 = g1 * m2
    M = max(m2, m3, m4)
    M1 = 2 * M + 2 * m * (1 + 2 * M)
    M2 = M + M1
    M3 = M + m * (1 + 2 * M)
    M4 = m * (1 + 2 * M)
    return AprioriBounds(m1, c1, g1, m2, m3, m4, M, M1, M2, M3, M4, M3 + M4)


def check_bounds(traj, bounds):
    """Raise :class:`BoundViolation` when iterates break the a priori estimates."""
    nu = np.linalg.norm(traj.u, axis=1)
    nv = np.linalg.norm(traj.v, axis=1)
    M = bounds.M
    if np.any(nu > M) or np.any(nv > M):
        raise BoundViolation(f"iterate norm {max(nu.max(), nv.max()):.6g} exceeds M={M:.6g}; "
                             "declared constants are inconsistent with the scenario")
    beta = traj.partition.beta
    prev = np.concatenate([[0.0], beta[:-1]])
    inc = np.linalg.norm(np.diff(traj.v, axis=0), axis=1)
    if np.any(inc > M * (beta + prev)):
        raise BoundViolation("velocity increment exceeds M (beta_{i+1} + beta_i)")
