"""Right-continuous nondecreasing clocks and the control measure nu = lambda + d rho.

A clock is stored as an absolutely continuous density ``r`` (piecewise
polynomial) plus a finite list of atoms.  Every half-open interval ]s, t]
gets an exact mass: the polynomial pieces are integrated in closed form and
atoms are summed explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import DomainError

MAX_NODES = 5_000_000


@dataclass(frozen=True)
class Piece:
    """Density piece ``r(t) = sum_k coeffs[k] * (t - start)**k`` on [start, next start)."""

    start: float
    coeffs: tuple


@dataclass(frozen=True)
class Atom:
    t: float
    size: float


class BVClock:
    """The function rho(t) = int_0^t r dlambda + sum_{tau_j <= t} sigma_j on [0, T]."""

    def __init__(self, horizon, ac_pieces=(), atoms=()):
        horizon = float(horizon)
        if not np.isfinite(horizon) or horizon <= 0:
            raise DomainError(f"horizon must be positive, got {horizon}")
        self.horizon = horizon
        self.tol = 1e-12 * horizon

        pieces = []
        for p in ac_pieces:
            if not isinstance(p, Piece):
                start, coeffs = p
                p = Piece(float(start), tuple(float(c) for c in coeffs))
            pieces.append(p)
        if pieces:
            starts = [p.start for p in pieces]
            if abs(starts[0]) > self.tol:
                raise DomainError("first density piece must start at 0")
            if any(b <= a for a, b in zip(starts, starts[1:])):
                raise DomainError("density piece starts must be strictly increasing")
            if starts[-1] >= horizon:
                raise DomainError("density piece starts beyond the horizon")
        self.pieces = tuple(pieces)
        self._ends = tuple(p.start for p in pieces[1:]) + (horizon,)
        for p, end in zip(self.pieces, self._ends):
            if _poly_min(p.coeffs, end - p.start) < -1e-14:
                raise DomainError(f"density piece starting at {p.start} takes negative values")
        # cumulative AC mass at each piece start
        self._piece_mass = np.array(
            [_poly_integral(p.coeffs, end - p.start) for p, end in zip(self.pieces, self._ends)]
        )
        self._cum = np.concatenate([[0.0], np.cumsum(self._piece_mass)])
        self._starts = np.array([p.start for p in self.pieces])

        atom_list = []
        for a in atoms:
            if not isinstance(a, Atom):
                a = Atom(float(a[0]), float(a[1]))
            atom_list.append(a)
        for a in atom_list:
            if not (0.0 < a.t <= horizon + self.tol):
                raise DomainError(f"atom time {a.t} outside ]0, T]")
            if not a.size > 0:
                raise DomainError(f"atom size must be positive, got {a.size}")
        if any(b.t <= a.t for a, b in zip(atom_list, atom_list[1:])):
            raise DomainError("atoms must be strictly increasing in time")
        self.atoms = tuple(atom_list)
        self._atom_t = np.array([a.t for a in self.atoms])
        self._atom_cum = np.concatenate([[0.0], np.cumsum([a.size for a in self.atoms])])

    @property
    def has_ac_part(self):
        return any(any(c != 0.0 for c in p.coeffs) for p in self.pieces)

    def _check(self, t):
        if not (-self.tol <= t <= self.horizon + self.tol):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")

    def ac_cumulative(self, t):
        """int_0^t r dlambda."""
        if not self.pieces:
            return 0.0
        t = min(max(t, 0.0), self.horizon)
        k = int(np.searchsorted(self._starts, t, side="right")) - 1
        k = max(k, 0)
        p = self.pieces[k]
        return float(self._cum[k] + _poly_integral(p.coeffs, t - p.start))

    def atom_cumulative(self, t):
        """Sum of atom sizes with tau_j <= t (times within tol identified)."""
        n = int(np.searchsorted(self._atom_t, t + self.tol, side="right"))
        return float(self._atom_cum[n])

    def density(self, t):
        """The AC density r(t), right-continuous at piece boundaries."""
        if not self.pieces:
            return 0.0
        k = max(int(np.searchsorted(self._starts, t, side="right")) - 1, 0)
        p = self.pieces[k]
        return float(P.polyval(t - p.start, p.coeffs))

    def rho(self, t):
        self._check(t)
        return self.ac_cumulative(t) + self.atom_cumulative(t)

    def is_atom(self, t):
        if not self.atoms:
            return False
        k = int(np.argmin(np.abs(self._atom_t - t)))
        return abs(self._atom_t[k] - t) <= self.tol

    def atom_size(self, t):
        for a in self.atoms:
            if abs(a.t - t) <= self.tol:
                return a.size
        return 0.0

    def __repr__(self):
        return f"BVClock(T={self.horizon}, pieces={len(self.pieces)}, atoms={list(self.atoms)})"


def rho_mass(clock, s, t):
    """d rho(]s, t])."""
    _check_interval(clock, s, t)
    ac = clock.ac_cumulative(t) - clock.ac_cumulative(s)
    return max(ac, 0.0) + clock.atom_cumulative(t) - clock.atom_cumulative(s)


def nu_mass(clock, s, t):
    """nu(]s, t]) = (t - s) + d rho(]s, t])."""
    _check_interval(clock, s, t)
    return (t - s) + rho_mass(clock, s, t)


def lambda_density(clock, t):
    """d lambda / d nu at t: zero on atoms, 1 / (1 + r(t)) elsewhere."""
    clock._check(t)
    if clock.is_atom(t):
        return 0.0
    return 1.0 / (1.0 + clock.density(t))


def _check_interval(clock, s, t):
    clock._check(s)
    clock._check(t)
    if s > t + clock.tol:
        raise DomainError(f"interval ]{s}, {t}] is reversed")


@dataclass(frozen=True)
class Partition:
    """Nodes 0 = t_0 < ... < t_q = T with per-cell masses.

    ``eta[i]``, ``delta[i]``, ``beta[i]`` refer to the cell ]t_i, t_{i+1}].
    """

    clock: BVClock
    eps: float
    nodes: np.ndarray
    eta: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    atom_flags: np.ndarray = field(repr=False)

    @property
    def q(self):
        return len(self.nodes) - 1

    def cell_left_closed(self, t):
        """Index i with t in [t_i, t_{i+1}[ (the last node maps to q)."""
        i = int(np.searchsorted(self.nodes, t + self.clock.tol, side="right")) - 1
        return min(max(i, 0), self.q)

    def cell_right_closed(self, t):
        """Index i with t in ]t_i, t_{i+1}]; t = 0 maps to cell 0."""
        i = int(np.searchsorted(self.nodes, t - self.clock.tol, side="left")) - 1
        return min(max(i, 0), self.q - 1)

    def node_index(self, t):
        """Index of the node coinciding with t, or None."""
        i = int(np.searchsorted(self.nodes, t - self.clock.tol, side="left"))
        if i <= self.q and abs(self.nodes[i] - t) <= self.clock.tol:
            return i
        return None


def build_partition(clock, eps):
    """Dyadic partition whose non-atomic cell masses are at most ``eps``.

    Breakpoints 0, the atoms and T split [0, T] into segments free of atoms
    in their interior.  Each segment is cut into 2**k pieces of equal
    non-atomic nu-mass (k minimal), so any decreasing sequence of ``eps``
    yields nested node sets.  Cells closing on an atom carry that atom's
    mass on top of at most ``eps``.
    """
    eps = float(eps)
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    T = clock.horizon
    breaks = [0.0] + [a.t for a in clock.atoms if a.t < T - clock.tol] + [T]
    nodes = [0.0]
    for a, b in zip(breaks, breaks[1:]):
        ga, gb = _smooth_mass(clock, a), _smooth_mass(clock, b)
        mass = gb - ga
        k = 0
        while mass / 2**k > eps:
            k += 1
        n = 2**k
        if len(nodes) + n > MAX_NODES:
            raise DomainError(f"eps={eps} requires more than {MAX_NODES} nodes")
        for j in range(1, n):
            target = ga + (j / n) * mass
            nodes.append(_invert_smooth_mass(clock, a, b, target))
        nodes.append(b)
    nodes = np.array(nodes)
    eta = np.diff(nodes)
    delta = np.array([rho_mass(clock, s, t) for s, t in zip(nodes[:-1], nodes[1:])])
    flags = np.array([clock.is_atom(t) for t in nodes])
    return Partition(clock, eps, nodes, eta, delta, eta + delta, flags)


def _smooth_mass(clock, t):
    return t + clock.ac_cumulative(t)


def _invert_smooth_mass(clock, a, b, target):
    if not clock.has_ac_part:
        return target
    return brentq(lambda t: _smooth_mass(clock, t) - target, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)


def _poly_integral(coeffs, x):
    if x <= 0.0:
        return 0.0
    return float(P.polyval(x, P.polyint(coeffs)))


def _poly_min(coeffs, length):
    """Minimum of the polynomial over [0, length]."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return 0.0
    cand = [0.0, length]
    if c.size > 2:
        for r in P.polyroots(P.polyder(c)):
            if abs(r.imag) < 1e-12 and 0.0 < r.real < length:
                cand.append(r.real)
    return float(min(P.polyval(x, c) for x in cand))
