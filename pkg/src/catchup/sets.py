"""Closed convex sets with Euclidean projections."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError

ACTIVE_SET_LIMIT = 8
PROJ_TOL = 1e-10


def _vec(x, d=None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if d is not None and x.shape != (d,):
        raise DomainError(f"expected a point of dimension {d}, got shape {x.shape}")
    return x


class ConvexSet:
    """Base class.  Subclasses implement ``project`` and ``affine``."""

    dim: int

    def project(self, x):
        raise NotImplementedError

    def affine(self, scale, shift):
        """The set ``scale * self + shift`` (scale > 0)."""
        raise NotImplementedError

    def distance(self, x):
        x = _vec(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=1e-12):
        return self.distance(x) <= tol

    def radius(self):
        """sup over the set of the norm; inf when unbounded."""
        raise NotImplementedError

    def vertices(self):
        return np.empty((0, self.dim))


class Box(ConvexSet):
    def __init__(self, lower, upper):
        self.lower = _vec(lower)
        self.upper = _vec(upper, self.lower.size)
        if np.any(self.lower > self.upper):
            raise DomainError("box lower bound exceeds upper bound")
        self.dim = self.lower.size

    def project(self, x):
        return np.clip(_vec(x, self.dim), self.lower, self.upper)

    def affine(self, scale, shift):
        shift = _vec(shift, self.dim)
        return Box(scale * self.lower + shift, scale * self.upper + shift)

    def radius(self):
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.linalg.norm(corner))

    def vertices(self):
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            return np.empty((0, self.dim))
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


class Ball(ConvexSet):
    def __init__(self, center, radius):
        self.center = _vec(center)
        self.r = float(radius)
        if not self.r >= 0:
            raise DomainError("ball radius must be nonnegative")
        self.dim = self.center.size

    def project(self, x):
        x = _vec(x, self.dim)
        d = x - self.center
        n = np.linalg.norm(d)
        if n <= self.r:
            return x
        return self.center + (self.r / n) * d

    def affine(self, scale, shift):
        return Ball(scale * self.center + _vec(shift, self.dim), scale * self.r)

    def radius(self):
        return float(np.linalg.norm(self.center) + self.r)

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.r})"


class HalfSpace(ConvexSet):
    """{x : <normal, x> <= offset}."""

    def __init__(self, normal, offset):
        self.normal = _vec(normal)
        nn = float(self.normal @ self.normal)
        if nn == 0.0:
            raise DomainError("half-space normal must be nonzero")
        self._nn = nn
        self.offset = float(offset)
        self.dim = self.normal.size

    def project(self, x):
        x = _vec(x, self.dim)
        excess = self.normal @ x - self.offset
        if excess <= 0:
            return x
        return x - (excess / self._nn) * self.normal

    def affine(self, scale, shift):
        shift = _vec(shift, self.dim)
        return HalfSpace(self.normal, scale * self.offset + self.normal @ shift)

    def radius(self):
        return np.inf

    def __repr__(self):
        return f"HalfSpace({self.normal.tolist()}, {self.offset})"


class Polyhedron(ConvexSet):
    """{x : G x <= h}, checked nonempty at construction."""

    def __init__(self, G, h, check=True):
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.h = _vec(h, self.G.shape[0])
        self.dim = self.G.shape[1]
        self._active_cache = None
        if np.any(np.linalg.norm(self.G, axis=1) == 0):
            raise DomainError("polyhedron has a zero constraint row")
        if check:
            res = linprog(np.zeros(self.dim), A_ub=self.G, b_ub=self.h,
                          bounds=[(None, None)] * self.dim, method="highs")
            if res.status != 0:
                raise DomainError("polyhedron {Gz <= h} is empty")

    def project(self, x):
        x = _vec(x, self.dim)
        if np.all(self.G @ x <= self.h + PROJ_TOL):
            return x
        if self.G.shape[0] <= ACTIVE_SET_LIMIT:
            z = self._project_active_set(x)
            if z is not None:
                return z
        return self._project_dual_gradient(x)

    def _subsets(self):
        # Gram inverses depend on G only, so they are shared by affine images
        if self._active_cache is None:
            m, cache = self.G.shape[0], []
            for size in range(1, min(m, self.dim) + 1):
                for S in itertools.combinations(range(m), size):
                    Gs = self.G[list(S)]
                    K = Gs @ Gs.T
                    if np.linalg.cond(K) > 1e12:
                        continue
                    cache.append((list(S), Gs, np.linalg.inv(K)))
            self._active_cache = cache
        return self._active_cache

    def _project_active_set(self, x):
        scale = 1.0 + np.abs(self.h).max() + np.linalg.norm(x)
        for S, Gs, Kinv in self._subsets():
            mu = Kinv @ (Gs @ x - self.h[S])
            if np.any(mu < -PROJ_TOL):
                continue
            z = x - Gs.T @ mu
            if np.all(self.G @ z <= self.h + PROJ_TOL * scale):
                return z
        return None

    def _project_dual_gradient(self, x, max_iter=200_000):
        # accelerated projected gradient on the multipliers of min |z - x|^2 / 2, Gz <= h
        G, h = self.G, self.h
        L = np.linalg.norm(G, 2) ** 2
        r = G @ x - h
        mu = np.zeros(len(h))
        y, t = mu.copy(), 1.0
        for _ in range(max_iter):
            grad = G @ (G.T @ y) - r
            mu_next = np.maximum(y - grad / L, 0.0)
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = mu_next + ((t - 1) / t_next) * (mu_next - mu)
            mu, t = mu_next, t_next
            z = x - G.T @ mu
            viol = np.max(G @ z - h)
            slack = h - G @ z
            if viol <= PROJ_TOL and np.max(np.abs(mu * slack)) <= PROJ_TOL:
                break
        return x - G.T @ mu

    def affine(self, scale, shift):
        shift = _vec(shift, self.dim)
        out = Polyhedron(self.G, scale * self.h + self.G @ shift, check=False)
        out._active_cache = self._subsets()
        return out

    def radius(self):
        best = 0.0
        for j in range(self.dim):
            for sgn in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[j] = -sgn
                res = linprog(c, A_ub=self.G, b_ub=self.h,
                              bounds=[(None, None)] * self.dim, method="highs")
                if res.status == 3:
                    return np.inf
        verts = self.vertices()
        if len(verts):
            best = float(np.max(np.linalg.norm(verts, axis=1)))
        return best

    def vertices(self):
        out = []
        m = self.G.shape[0]
        for S in itertools.combinations(range(m), self.dim):
            Gs = self.G[list(S)]
            if abs(np.linalg.det(Gs)) < 1e-12:
                continue
            z = np.linalg.solve(Gs, self.h[list(S)])
            if np.all(self.G @ z <= self.h + 1e-9):
                if not any(np.allclose(z, w, atol=1e-12) for w in out):
                    out.append(z)
        return np.array(out) if out else np.empty((0, self.dim))

    def __repr__(self):
        return f"Polyhedron(G={self.G.tolist()}, h={self.h.tolist()})"


def project(cset, x):
    """Euclidean projection of x onto the set."""
    return cset.project(x)


def make_set(spec):
    """Build a set from its scenario-file block."""
    kind = spec["type"]
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "halfspace":
        return HalfSpace(spec["normal"], spec["offset"])
    if kind == "polyhedron":
        return Polyhedron(spec["G"], spec["h"])
    raise DomainError(f"unknown set type {kind!r}")
