"""Maximal monotone operators with closed-form resolvents.

An :class:`OperatorFamily` maps ``(t, state)`` to a fixed operator
instance (:class:`NormalCone`, :class:`L1Subdifferential`,
:class:`QuadraticSubdifferential` or :class:`LinearOperator`).  Instances
expose the resolvent, the minimal section, a graph-membership residual and
the distance to the domain.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .sets import _vec, make_set

DOMAIN_TOL = 1e-8


class MaximalMonotone:
    dim: int
    total_domain = True
    # analytic constant c with |A0(y)| <= c (1 + |y|)
    c_growth = 0.0

    def resolvent(self, eta, x):
        raise NotImplementedError

    def minimal_section(self, y, tol=DOMAIN_TOL):
        raise NotImplementedError

    def graph_residual(self, y, z):
        raise NotImplementedError

    def domain_distance(self, y):
        return 0.0

    def project_domain(self, y):
        return _vec(y, self.dim)

    def vertices(self):
        return np.empty((0, self.dim))

    def sample_graph(self, rng, n, box=(-3.0, 3.0)):
        """Points (x_k, y_k) of the graph, x uniform in the box."""
        X = rng.uniform(box[0], box[1], size=(n, self.dim))
        Y = np.array([self.minimal_section(x) for x in X])
        return X, Y

    def _check_domain(self, y, tol):
        y = _vec(y, self.dim)
        dd = self.domain_distance(y)
        if dd > tol:
            raise DomainError(f"point at distance {dd:.3e} from the operator domain")
        return y


class NormalCone(MaximalMonotone):
    """N_C for a closed convex set C; the resolvent is the projection for every eta."""

    total_domain = False

    def __init__(self, cset):
        self.set = cset
        self.dim = cset.dim

    def resolvent(self, eta, x):
        _check_eta(eta)
        return self.set.project(x)

    def minimal_section(self, y, tol=DOMAIN_TOL):
        self._check_domain(y, tol)
        return np.zeros(self.dim)

    def graph_residual(self, y, z):
        y, z = _vec(y, self.dim), _vec(z, self.dim)
        return float(np.linalg.norm(self.set.project(y + z) - y))

    def domain_distance(self, y):
        return self.set.distance(y)

    def project_domain(self, y):
        return self.set.project(y)

    def vertices(self):
        return self.set.vertices()

    def sample_graph(self, rng, n, box=(-3.0, 3.0)):
        probes = rng.uniform(box[0], box[1], size=(n, self.dim))
        X = np.array([self.set.project(p) for p in probes])
        N = probes - X
        norms = np.linalg.norm(N, axis=1)
        unit = np.divide(N, norms[:, None], out=np.zeros_like(N), where=norms[:, None] > 0)
        mult = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=n))
        mult[rng.uniform(size=n) < 0.25] = 0.0
        return X, unit * mult[:, None]


class L1Subdifferential(MaximalMonotone):
    """Subdifferential of weight * |x|_1."""

    def __init__(self, dim, weight=1.0):
        self.dim = int(dim)
        self.weight = float(weight)
        if self.weight < 0:
            raise DomainError("l1 weight must be nonnegative")
        self.c_growth = self.weight * np.sqrt(self.dim)

    def resolvent(self, eta, x):
        _check_eta(eta)
        x = _vec(x, self.dim)
        return np.sign(x) * np.maximum(np.abs(x) - eta * self.weight, 0.0)

    def minimal_section(self, y, tol=DOMAIN_TOL):
        y = _vec(y, self.dim)
        return self.weight * np.sign(y)

    def graph_residual(self, y, z):
        y, z = _vec(y, self.dim), _vec(z, self.dim)
        w = self.weight
        lo = np.where(y > 0, w, -w)
        hi = np.where(y < 0, -w, w)
        gap = np.maximum(lo - z, 0.0) + np.maximum(z - hi, 0.0)
        return float(np.linalg.norm(gap))

    def sample_graph(self, rng, n, box=(-3.0, 3.0)):
        X = rng.uniform(box[0], box[1], size=(n, self.dim))
        zero = rng.uniform(size=X.shape) < 0.3
        X[zero] = 0.0
        Y = self.weight * np.sign(X)
        Y[zero] = rng.uniform(-self.weight, self.weight, size=int(zero.sum()))
        return X, Y


class QuadraticSubdifferential(MaximalMonotone):
    """Gradient of x -> <Qx, x> / 2 with Q symmetric positive semidefinite."""

    def __init__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
            raise DomainError("quadratic form must be a symmetric square matrix")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise DomainError("quadratic form must be positive semidefinite")
        self.Q = Q
        self.dim = Q.shape[0]
        self.c_growth = float(np.linalg.norm(Q, 2))

    def resolvent(self, eta, x):
        _check_eta(eta)
        return np.linalg.solve(np.eye(self.dim) + eta * self.Q, _vec(x, self.dim))

    def minimal_section(self, y, tol=DOMAIN_TOL):
        return self.Q @ _vec(y, self.dim)

    def graph_residual(self, y, z):
        y, z = _vec(y, self.dim), _vec(z, self.dim)
        return float(np.linalg.norm(z - self.Q @ y))


class LinearOperator(MaximalMonotone):
    """y -> M y with M + M^T positive semidefinite."""

    def __init__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise DomainError("linear operator must be square")
        if np.linalg.eigvalsh(M + M.T).min() < -1e-12:
            raise DomainError("linear operator is not monotone (M + M^T not PSD)")
        self.M = M
        self.dim = M.shape[0]
        self.c_growth = float(np.linalg.norm(M, 2))

    def resolvent(self, eta, x):
        _check_eta(eta)
        return np.linalg.solve(np.eye(self.dim) + eta * self.M, _vec(x, self.dim))

    def minimal_section(self, y, tol=DOMAIN_TOL):
        return self.M @ _vec(y, self.dim)

    def graph_residual(self, y, z):
        y, z = _vec(y, self.dim), _vec(z, self.dim)
        return float(np.linalg.norm(z - self.M @ y))


def _check_eta(eta):
    if not eta > 0:
        raise DomainError(f"resolvent parameter must be positive, got {eta}")


class OperatorFamily:
    """(t, state) -> A(t, state), with the Lipschitz constant gamma in the state."""

    kind = "static"
    gamma = 0.0
    state_dependent = False

    def __init__(self, instance, kind):
        self._instance = instance
        self.kind = kind
        self.dim = instance.dim
        self.c_growth = instance.c_growth

    def at(self, t, state):
        return self._instance

    def time_rate(self):
        """Hausdorff speed of the domain in units of d rho (0 for static families)."""
        return 0.0


class MovingNormalCone(OperatorFamily):
    """Normal cone of C(t, x) = s(t) K + shift0 + direction rho(t) + L x.

    ``s(t) = scale0 + scale_rate * rho(t)`` must stay positive on [0, T].
    Without ``state_matrix`` the family depends on time only.
    """

    kind = "normal_cone"

    def __init__(self, base, clock, shift0=None, direction=None, scale0=1.0,
                 scale_rate=0.0, state_matrix=None):
        d = base.dim
        self.base = base
        self.clock = clock
        self.dim = d
        self.shift0 = np.zeros(d) if shift0 is None else _vec(shift0, d)
        self.direction = np.zeros(d) if direction is None else _vec(direction, d)
        self.scale0 = float(scale0)
        self.scale_rate = float(scale_rate)
        if min(self.scale0, self.scale0 + self.scale_rate * clock.rho(clock.horizon)) <= 0:
            raise DomainError("moving set scale must stay positive")
        if state_matrix is None:
            self.L = None
            self.gamma = 0.0
            self.state_dependent = False
        else:
            self.L = np.atleast_2d(np.asarray(state_matrix, dtype=float))
            if self.L.shape != (d, d):
                raise DomainError(f"state map must be {d}x{d}")
            self.gamma = float(np.linalg.norm(self.L, 2))
            self.state_dependent = bool(np.any(self.L != 0))
        self.c_growth = 0.0

    def moving_set(self, t, state):
        r = self.clock.rho(t)
        shift = self.shift0 + self.direction * r
        if self.L is not None:
            shift = shift + self.L @ _vec(state, self.dim)
        return self.base.affine(self.scale0 + self.scale_rate * r, shift)

    def at(self, t, state):
        return NormalCone(self.moving_set(t, state))

    def time_rate(self):
        rate = float(np.linalg.norm(self.direction))
        if self.scale_rate != 0.0:
            rate += abs(self.scale_rate) * self.base.radius()
        return rate


def make_family(spec, clock, dim):
    """Build an operator family from its scenario-file block."""
    kind = spec["kind"]
    if kind == "normal_cone":
        base = make_set(spec["set"])
        if base.dim != dim:
            raise DomainError(f"set dimension {base.dim} differs from scenario dimension {dim}")
        motion = spec.get("motion") or {}
        return MovingNormalCone(
            base, clock,
            shift0=motion.get("shift0"), direction=motion.get("direction"),
            scale0=motion.get("scale0", 1.0), scale_rate=motion.get("scale_rate", 0.0),
            state_matrix=spec.get("state_map"),
        )
    if kind == "l1":
        return OperatorFamily(L1Subdifferential(dim, spec.get("weight", 1.0)), kind)
    if kind == "quadratic":
        inst = QuadraticSubdifferential(spec["Q"])
        _check_dim(inst, dim)
        return OperatorFamily(inst, kind)
    if kind == "indicator":
        inst = NormalCone(make_set(spec["set"]))
        _check_dim(inst, dim)
        return OperatorFamily(inst, kind)
    if kind == "linear":
        inst = LinearOperator(spec["M"])
        _check_dim(inst, dim)
        return OperatorFamily(inst, kind)
    raise DomainError(f"unknown operator kind {kind!r}")


def _check_dim(inst, dim):
    if inst.dim != dim:
        raise DomainError(f"operator dimension {inst.dim} differs from scenario dimension {dim}")


# functional surface ---------------------------------------------------------

def resolvent(fam, t, state, eta, x):
    """(I + eta A(t, state))^{-1} x."""
    return fam.at(t, state).resolvent(eta, x)


def minimal_section(fam, t, state, y, tol=DOMAIN_TOL):
    return fam.at(t, state).minimal_section(y, tol)


def graph_residual(fam, t, state, y, z):
    """Zero iff z lies in A(t, state) y."""
    return fam.at(t, state).graph_residual(y, z)


def domain_distance(fam, t, state, y):
    return fam.at(t, state).domain_distance(y)


def dis_estimate(A, B, n_samples, seed=0, box=(-3.0, 3.0)):
    """Sampled lower bound of the pseudo-distance

        sup <y - y', x' - x> / (1 + |y| + |y'|)  over (x, y) in Gr A, (x', y') in Gr B,

    clipped below at zero.  ``ceil(sqrt(n_samples))`` graph points are drawn
    on each side and every pair is evaluated.
    """
    if n_samples <= 0:
        raise DomainError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    k = int(np.ceil(np.sqrt(n_samples)))
    X, Y = A.sample_graph(rng, k, box)
    Xp, Yp = B.sample_graph(rng, k, box)
    # <y - y', x' - x> for all pairs
    num = (Y @ Xp.T) - np.sum(Y * X, axis=1)[:, None] - np.sum(Yp * Xp, axis=1)[None, :] + (X @ Yp.T)
    den = 1.0 + np.linalg.norm(Y, axis=1)[:, None] + np.linalg.norm(Yp, axis=1)[None, :]
    return max(0.0, float(np.max(num / den)))


# sampled hypothesis checks ---------------------------------------------------

def monotonicity_gap(op, n=200, seed=0, box=(-3.0, 3.0)):
    """min over sampled graph pairs of <y1 - y2, x1 - x2> (should be >= 0)."""
    rng = np.random.default_rng(seed)
    X, Y = op.sample_graph(rng, n, box)
    dX = X[:, None, :] - X[None, :, :]
    dY = Y[:, None, :] - Y[None, :, :]
    return float(np.min(np.sum(dX * dY, axis=2)))


def growth_ratio(fam, clock, n=200, seed=0, box=(-3.0, 3.0)):
    """Sampled sup of |A0(t, x) y| / (1 + |x| + |y|) over y in the domain."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        t = rng.uniform(0.0, clock.horizon)
        x = rng.uniform(box[0], box[1], fam.dim)
        op = fam.at(t, x)
        y = op.project_domain(rng.uniform(box[0], box[1], fam.dim))
        a0 = op.minimal_section(y, tol=1e-6)
        worst = max(worst, float(np.linalg.norm(a0)) / (1 + np.linalg.norm(x) + np.linalg.norm(y)))
    return worst
