"""Scenario description: structured-text (JSON) format, defaults and hypothesis checks.

A scenario file has the sections ``dimension``, ``horizon``, ``clock``,
``operator``, ``perturbation``, ``initial``, ``constants``, ``schedule`` and
``tolerances`` (plus an optional ``name``).  :func:`normalize` fills every
default and rejects unknown fields, so ``normalize(json.loads(dumps(s)))``
returns ``s`` unchanged.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .measure import BVClock, rho_mass
from .operators import dis_estimate, growth_ratio, make_family

DEFAULT_TOLERANCES = {"inclusion": 1e-8, "domain": 1e-8, "vi": 1e-6, "gap": 1e-2}
DEFAULT_SCHEDULE = {"eps0": 0.0625, "ratio": 0.5, "levels": 6}


class Perturbation:
    """f(t, x, y) = e(t) + L1 x + L2 y + a * tanh(P x + Q y).

    ``e(t) = sum_k e_poly[k] t**k + amp * sin(omega t + phase)``.
    """

    def __init__(self, dim, e_poly=None, e_sin=None, L1=None, L2=None, saturation=None):
        d = self.dim = dim
        self.e_poly = np.zeros((0, d)) if not e_poly else np.asarray(e_poly, dtype=float).reshape(-1, d)
        if e_sin:
            self.sin_amp = np.asarray(e_sin["amplitude"], dtype=float).reshape(d)
            self.sin_omega = float(e_sin["omega"])
            self.sin_phase = float(e_sin.get("phase", 0.0))
        else:
            self.sin_amp = None
        self.L1 = None if L1 is None else np.asarray(L1, dtype=float).reshape(d, d)
        self.L2 = None if L2 is None else np.asarray(L2, dtype=float).reshape(d, d)
        if saturation:
            self.sat_amp = np.asarray(saturation["amplitude"], dtype=float).reshape(d)
            self.sat_P = np.asarray(saturation.get("P") or np.zeros((d, d)), dtype=float).reshape(d, d)
            self.sat_Q = np.asarray(saturation.get("Q") or np.zeros((d, d)), dtype=float).reshape(d, d)
        else:
            self.sat_amp = None
        self.time_dependent = len(self.e_poly) > 1 or (self.sin_amp is not None and np.any(self.sin_amp != 0))
        self.zero = (not np.any(self.e_poly)) and (self.sin_amp is None or not np.any(self.sin_amp)) \
            and (self.L1 is None or not np.any(self.L1)) and (self.L2 is None or not np.any(self.L2)) \
            and (self.sat_amp is None or not np.any(self.sat_amp))

    def forcing(self, t):
        e = np.zeros(self.dim)
        for k in range(len(self.e_poly) - 1, -1, -1):
            e = e * t + self.e_poly[k]
        if self.sin_amp is not None:
            e = e + self.sin_amp * np.sin(self.sin_omega * t + self.sin_phase)
        return e

    def __call__(self, t, x, y):
        out = self.forcing(t)
        if self.L1 is not None:
            out = out + self.L1 @ x
        if self.L2 is not None:
            out = out + self.L2 @ y
        if self.sat_amp is not None:
            out = out + self.sat_amp * np.tanh(self.sat_P @ x + self.sat_Q @ y)
        return out

    def forcing_bound(self, T):
        e = sum(np.linalg.norm(c) * T**k for k, c in enumerate(self.e_poly))
        if self.sin_amp is not None:
            e += np.linalg.norm(self.sin_amp)
        return float(e)

    def growth_constant(self, T):
        """m with |f(t, x, y)| <= m (1 + |x| + |y|)."""
        e = self.forcing_bound(T) + (0.0 if self.sat_amp is None else float(np.linalg.norm(self.sat_amp)))
        n1 = 0.0 if self.L1 is None else float(np.linalg.norm(self.L1, 2))
        n2 = 0.0 if self.L2 is None else float(np.linalg.norm(self.L2, 2))
        return max(e, n1, n2)

    def lipschitz_constant(self):
        """k with |f(t,x,y) - f(t,x',y')| <= k (|x - x'| + |y - y'|)."""
        kx = 0.0 if self.L1 is None else float(np.linalg.norm(self.L1, 2))
        ky = 0.0 if self.L2 is None else float(np.linalg.norm(self.L2, 2))
        if self.sat_amp is not None:
            D = np.diag(self.sat_amp)
            kx += float(np.linalg.norm(D @ self.sat_P, 2))
            ky += float(np.linalg.norm(D @ self.sat_Q, 2))
        return max(kx, ky)


@dataclass
class Scenario:
    spec: dict
    dim: int
    horizon: float
    clock: BVClock
    family: object
    f: Perturbation
    u0: np.ndarray
    v0: np.ndarray
    gamma: float
    c: float
    m: float
    k_bound: float
    schedule: dict
    tolerances: dict
    name: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def epsilons(self):
        s = self.schedule
        return [s["eps0"] * s["ratio"] ** l for l in range(s["levels"])]

    def with_schedule(self, **kw):
        spec = copy.deepcopy(self.spec)
        spec["schedule"].update(kw)
        return from_spec(spec)


# parsing ---------------------------------------------------------------------

_TOP = {"name", "dimension", "horizon", "clock", "operator", "perturbation", "initial",
        "constants", "schedule", "tolerances"}
_OPERATOR_KEYS = {
    "normal_cone": {"kind", "set", "motion", "state_map"},
    "indicator": {"kind", "set"},
    "l1": {"kind", "weight"},
    "quadratic": {"kind", "Q"},
    "linear": {"kind", "M"},
}
_SET_KEYS = {
    "box": {"type", "lower", "upper"},
    "ball": {"type", "center", "radius"},
    "halfspace": {"type", "normal", "offset"},
    "polyhedron": {"type", "G", "h"},
}


def _unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ValidationError(f"{where}: expected an object", tag=where)
    for k in d:
        if k not in allowed:
            loc = f"{where}.{k}" if where else k
            raise ValidationError(f"unknown field {loc!r}", tag=loc)


def _num(x, where, positive=False, nonneg=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {x!r}", tag=where)
    x = float(x)
    if not np.isfinite(x):
        raise ValidationError(f"{where}: must be finite", tag=where)
    if positive and not x > 0:
        raise ValidationError(f"{where}: must be positive, got {x}", tag=where)
    if nonneg and x < 0:
        raise ValidationError(f"{where}: must be nonnegative, got {x}", tag=where)
    return x


def _vector(x, d, where):
    if not isinstance(x, list) or len(x) != d:
        raise ValidationError(f"{where}: expected a list of {d} numbers", tag=where)
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(x)]


def _matrix(x, d, where):
    if not isinstance(x, list) or len(x) != d:
        raise ValidationError(f"{where}: expected a {d}x{d} matrix", tag=where)
    return [_vector(row, d, f"{where}[{i}]") for i, row in enumerate(x)]


def _normalize_set(s, d, where):
    if not isinstance(s, dict) or s.get("type") not in _SET_KEYS:
        raise ValidationError(f"{where}.type: expected one of {sorted(_SET_KEYS)}", tag=f"{where}.type")
    kind = s["type"]
    _unknown(s, _SET_KEYS[kind], where)
    if kind == "box":
        return {"type": kind, "lower": _vector(s.get("lower"), d, f"{where}.lower"),
                "upper": _vector(s.get("upper"), d, f"{where}.upper")}
    if kind == "ball":
        return {"type": kind, "center": _vector(s.get("center"), d, f"{where}.center"),
                "radius": _num(s.get("radius"), f"{where}.radius", nonneg=True)}
    if kind == "halfspace":
        return {"type": kind, "normal": _vector(s.get("normal"), d, f"{where}.normal"),
                "offset": _num(s.get("offset"), f"{where}.offset")}
    G = s.get("G")
    if not isinstance(G, list) or not G:
        raise ValidationError(f"{where}.G: expected a nonempty list of rows", tag=f"{where}.G")
    rows = [_vector(r, d, f"{where}.G[{i}]") for i, r in enumerate(G)]
    return {"type": kind, "G": rows, "h": _vector(s.get("h"), len(rows), f"{where}.h")}


def normalize(raw):
    """Validate structure and fill defaults; returns a new plain dict."""
    _unknown(raw, _TOP, "")
    for key in ("dimension", "horizon", "initial"):
        if key not in raw:
            raise ValidationError(f"missing required field {key!r}", tag=key)
    dim = raw["dimension"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ValidationError("dimension: expected a positive integer", tag="dimension")
    T = _num(raw["horizon"], "horizon", positive=True)
    out = {"name": str(raw.get("name", "")), "dimension": dim, "horizon": T}

    clock = raw.get("clock", {})
    _unknown(clock, {"ac_pieces", "atoms"}, "clock")
    pieces = []
    for i, p in enumerate(clock.get("ac_pieces", [])):
        where = f"clock.ac_pieces[{i}]"
        _unknown(p, {"start", "coeffs"}, where)
        coeffs = p.get("coeffs")
        if not isinstance(coeffs, list):
            raise ValidationError(f"{where}.coeffs: expected a list", tag=f"{where}.coeffs")
        pieces.append({"start": _num(p.get("start"), f"{where}.start", nonneg=True),
                       "coeffs": [_num(c, f"{where}.coeffs[{j}]") for j, c in enumerate(coeffs)]})
    atoms = []
    for i, a in enumerate(clock.get("atoms", [])):
        where = f"clock.atoms[{i}]"
        _unknown(a, {"t", "size"}, where)
        atoms.append({"t": _num(a.get("t"), f"{where}.t", positive=True),
                      "size": _num(a.get("size"), f"{where}.size", positive=True)})
    out["clock"] = {"ac_pieces": pieces, "atoms": atoms}

    op = raw.get("operator", {"kind": "linear", "M": [[0.0] * dim for _ in range(dim)]})
    if not isinstance(op, dict) or op.get("kind") not in _OPERATOR_KEYS:
        raise ValidationError(f"operator.kind: expected one of {sorted(_OPERATOR_KEYS)}", tag="operator.kind")
    kind = op["kind"]
    _unknown(op, _OPERATOR_KEYS[kind], "operator")
    nop = {"kind": kind}
    if kind in ("normal_cone", "indicator"):
        nop["set"] = _normalize_set(op.get("set"), dim, "operator.set")
    if kind == "normal_cone":
        motion = op.get("motion") or {}
        _unknown(motion, {"shift0", "direction", "scale0", "scale_rate"}, "operator.motion")
        nop["motion"] = {
            "shift0": _vector(motion.get("shift0", [0.0] * dim), dim, "operator.motion.shift0"),
            "direction": _vector(motion.get("direction", [0.0] * dim), dim, "operator.motion.direction"),
            "scale0": _num(motion.get("scale0", 1.0), "operator.motion.scale0", positive=True),
            "scale_rate": _num(motion.get("scale_rate", 0.0), "operator.motion.scale_rate"),
        }
        sm = op.get("state_map")
        nop["state_map"] = None if sm is None else _matrix(sm, dim, "operator.state_map")
    if kind == "l1":
        nop["weight"] = _num(op.get("weight", 1.0), "operator.weight", nonneg=True)
    if kind == "quadratic":
        nop["Q"] = _matrix(op.get("Q"), dim, "operator.Q")
    if kind == "linear":
        nop["M"] = _matrix(op.get("M"), dim, "operator.M")
    out["operator"] = nop

    pert = raw.get("perturbation", {})
    _unknown(pert, {"e_poly", "e_sin", "L1", "L2", "saturation"}, "perturbation")
    npert = {"e_poly": [_vector(c, dim, f"perturbation.e_poly[{i}]") for i, c in enumerate(pert.get("e_poly", []))],
             "e_sin": None, "L1": None, "L2": None, "saturation": None}
    if pert.get("e_sin") is not None:
        es = pert["e_sin"]
        _unknown(es, {"amplitude", "omega", "phase"}, "perturbation.e_sin")
        npert["e_sin"] = {"amplitude": _vector(es.get("amplitude"), dim, "perturbation.e_sin.amplitude"),
                          "omega": _num(es.get("omega"), "perturbation.e_sin.omega"),
                          "phase": _num(es.get("phase", 0.0), "perturbation.e_sin.phase")}
    for key in ("L1", "L2"):
        if pert.get(key) is not None:
            npert[key] = _matrix(pert[key], dim, f"perturbation.{key}")
    if pert.get("saturation") is not None:
        sat = pert["saturation"]
        _unknown(sat, {"amplitude", "P", "Q"}, "perturbation.saturation")
        zero = [[0.0] * dim for _ in range(dim)]
        npert["saturation"] = {
            "amplitude": _vector(sat.get("amplitude"), dim, "perturbation.saturation.amplitude"),
            "P": _matrix(sat.get("P", zero), dim, "perturbation.saturation.P"),
            "Q": _matrix(sat.get("Q", zero), dim, "perturbation.saturation.Q"),
        }
    out["perturbation"] = npert

    init = raw["initial"]
    _unknown(init, {"u0", "v0"}, "initial")
    out["initial"] = {"u0": _vector(init.get("u0"), dim, "initial.u0"),
                      "v0": _vector(init.get("v0"), dim, "initial.v0")}

    consts = raw.get("constants", {})
    _unknown(consts, {"gamma", "c", "m", "k_bound"}, "constants")
    out["constants"] = {}
    for key in ("gamma", "c", "m", "k_bound"):
        val = consts.get(key)
        out["constants"][key] = None if val is None else _num(val, f"constants.{key}", nonneg=True)

    sched = raw.get("schedule", {})
    _unknown(sched, {"eps0", "ratio", "levels"}, "schedule")
    ratio = _num(sched.get("ratio", DEFAULT_SCHEDULE["ratio"]), "schedule.ratio", positive=True)
    if ratio >= 1:
        raise ValidationError("schedule.ratio: must be below 1", tag="schedule.ratio")
    levels = sched.get("levels", DEFAULT_SCHEDULE["levels"])
    if isinstance(levels, bool) or not isinstance(levels, int) or levels < 1:
        raise ValidationError("schedule.levels: expected a positive integer", tag="schedule.levels")
    out["schedule"] = {"eps0": _num(sched.get("eps0", DEFAULT_SCHEDULE["eps0"]), "schedule.eps0", positive=True),
                       "ratio": ratio, "levels": levels}

    tols = raw.get("tolerances", {})
    _unknown(tols, set(DEFAULT_TOLERANCES), "tolerances")
    out["tolerances"] = {k: _num(tols.get(k, v), f"tolerances.{k}", positive=True)
                         for k, v in DEFAULT_TOLERANCES.items()}
    return out


def from_spec(spec):
    """Build a :class:`Scenario` from a normalized dict."""
    d, T = spec["dimension"], spec["horizon"]
    cl = spec["clock"]
    try:
        clock = BVClock(T, [(p["start"], p["coeffs"]) for p in cl["ac_pieces"]],
                        [(a["t"], a["size"]) for a in cl["atoms"]])
    except DomainError as exc:
        raise ValidationError(f"clock: {exc}", tag="clock") from exc
    try:
        family = make_family(spec["operator"], clock, d)
    except DomainError as exc:
        raise ValidationError(f"operator: {exc}", tag="operator") from exc
    p = spec["perturbation"]
    f = Perturbation(d, p["e_poly"], p["e_sin"], p["L1"], p["L2"], p["saturation"])
    c = spec["constants"]
    return Scenario(
        spec=spec, dim=d, horizon=T, clock=clock, family=family, f=f,
        u0=np.array(spec["initial"]["u0"]), v0=np.array(spec["initial"]["v0"]),
        gamma=family.gamma if c["gamma"] is None else c["gamma"],
        c=family.c_growth if c["c"] is None else c["c"],
        m=f.growth_constant(T) if c["m"] is None else c["m"],
        k_bound=f.lipschitz_constant() if c["k_bound"] is None else c["k_bound"],
        schedule=dict(spec["schedule"]), tolerances=dict(spec["tolerances"]),
        name=spec["name"],
    )


def loads(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", tag="syntax") from exc
    return from_spec(normalize(raw))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dumps(scn_or_spec):
    spec = scn_or_spec.spec if isinstance(scn_or_spec, Scenario) else scn_or_spec
    return json.dumps(spec, indent=2) + "\n"


# hypothesis checks -----------------------------------------------------------

def validate(scn, n=200, seed=0, strict=True):
    """Sampled checks of the standing hypotheses.

    Passing is necessary, not sufficient: every check is a finite sample.
    Returns a list of ``(tag, ok, message)``; with ``strict`` the first
    failure raises :class:`ValidationError`.
    """
    rng = np.random.default_rng(seed)
    fam, clock, f = scn.family, scn.clock, scn.f
    d, T = scn.dim, scn.horizon
    report = []

    def record(tag, ok, msg):
        report.append((tag, bool(ok), msg))
        if strict and not ok:
            raise ValidationError(f"({tag}) {msg}", tag=tag)

    dd = fam.at(0.0, scn.u0).domain_distance(scn.v0)
    record("initial", dd <= scn.tolerances["domain"],
           f"v0 lies at distance {dd:.3e} from D(A(0, u0))")

    rate = fam.time_rate()
    record("H1", rate <= 1.0 + 1e-12,
           f"time variation of the operator is {rate:.6g} per unit of d rho (must be <= 1)")
    record("H1", scn.gamma >= fam.gamma - 1e-12,
           f"declared gamma={scn.gamma:.6g} below state Lipschitz constant {fam.gamma:.6g}")
    if fam.kind == "normal_cone":
        worst = -np.inf
        for _ in range(max(4, n // 50)):
            s, t = np.sort(rng.uniform(0.0, T, 2))
            x, y = rng.uniform(-2, 2, d), rng.uniform(-2, 2, d)
            est = dis_estimate(fam.at(t, x), fam.at(s, y), 400, seed=int(rng.integers(1 << 31)))
            worst = max(worst, est - rho_mass(clock, s, t) - scn.gamma * np.linalg.norm(x - y))
        record("H1", worst <= 1e-9, f"sampled pseudo-distance exceeds the bound by {worst:.3e}")

    g = growth_ratio(fam, clock, n=n, seed=seed)
    record("H2", g <= scn.c + 1e-12, f"sampled |A0| growth {g:.6g} exceeds declared c={scn.c:.6g}")

    mq, kq = 0.0, 0.0
    for _ in range(n):
        t = rng.uniform(0.0, T)
        x, y = rng.normal(0, 3, d), rng.normal(0, 3, d)
        x2, y2 = x + rng.normal(0, 1, d), y + rng.normal(0, 1, d)
        fx = f(t, x, y)
        mq = max(mq, np.linalg.norm(fx) / (1 + np.linalg.norm(x) + np.linalg.norm(y)))
        den = np.linalg.norm(x - x2) + np.linalg.norm(y - y2)
        if den > 0:
            kq = max(kq, np.linalg.norm(fx - f(t, x2, y2)) / den)
    record("H5", kq <= scn.k_bound + 1e-12, f"sampled Lipschitz quotient {kq:.6g} exceeds k={scn.k_bound:.6g}")
    record("H6", mq <= scn.m + 1e-12, f"sampled growth quotient {mq:.6g} exceeds m={scn.m:.6g}")
    return report
