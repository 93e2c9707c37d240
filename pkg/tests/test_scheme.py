import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catchup.errors import DomainError
from catchup.measure import BVClock, build_partition, nu_mass
from catchup.operators import LinearOperator, MovingNormalCone, NormalCone, OperatorFamily
from catchup.scheme import (
    adaptive_simpson, apriori_bounds, catch_up_step, cell_load, check_bounds, density_du,
    density_dv, gronwall_bound, integrate_frozen, interpolate, run,
)
from catchup.sets import Box, HalfSpace

from conftest import SHIPPED, make_scenario, shipped


class TimesState:
    """f(s, x, y) = s * x."""

    time_dependent = True

    def __call__(self, s, x, y):
        return s * np.asarray(x, dtype=float)


class Constant:
    time_dependent = False

    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def __call__(self, s, x, y):
        return self.g


ZERO_OP = OperatorFamily(LinearOperator(np.zeros((1, 1))), "linear")
INTERVAL = OperatorFamily(NormalCone(Box([-1.0], [1.0])), "indicator")


# quadrature and loads ------------------------------------------------------------

def test_adaptive_simpson_against_closed_form():
    val = adaptive_simpson(lambda s: np.array([np.sin(s), np.exp(s)]), 0.0, 2.0, 1e-13)
    assert np.allclose(val, [1 - np.cos(2.0), np.exp(2.0) - 1], atol=1e-11)


def test_cell_load_examples():
    P = build_partition(BVClock(1.0), 0.25)
    assert np.array_equal(cell_load(Constant([0.0, 0.0]), P, 1, np.zeros(2), np.zeros(2)), [0.0, 0.0])
    assert np.allclose(cell_load(Constant([1.0, 0.0]), P, 2, np.zeros(2), np.zeros(2)), [0.25, 0.0], atol=0)
    P2 = build_partition(BVClock(1.0), 0.5)
    # int_0^0.5 s ds = 0.125
    assert cell_load(TimesState(), P2, 0, np.array([1.0]), np.array([0.0])) == pytest.approx([0.125], abs=1e-14)


def test_integrate_frozen_degenerate_interval():
    assert np.array_equal(integrate_frozen(Constant([2.0]), 0.3, 0.3, np.zeros(1), np.zeros(1)), [0.0])


# single steps --------------------------------------------------------------------

def test_step_zero_operator_is_free_motion():
    P = build_partition(BVClock(1.0), 0.25)
    u, v, res = catch_up_step(ZERO_OP, P, 1, np.array([0.3]), np.array([2.0]), np.zeros(1))
    assert v == pytest.approx([2.0]) and u == pytest.approx([0.3 + 0.25 * 2.0]) and res == 0.0


@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_step_interval_projects(eps):
    P = build_partition(BVClock(1.0), eps)
    u, v, res = catch_up_step(INTERVAL, P, 0, np.array([0.0]), np.array([3.0]), np.zeros(1))
    assert v == pytest.approx([1.0]) and u == pytest.approx([P.beta[0]]) and res <= 1e-12


def test_step_realizes_constraint_drop_at_atom():
    clock = BVClock(1.0, atoms=[(0.5, 1.0)])
    fam = MovingNormalCone(HalfSpace([1.0], 1.0), clock, direction=[-1.0])
    P = build_partition(clock, 0.25)
    i = P.node_index(0.5) - 1
    u, v, res = catch_up_step(fam, P, i, np.array([0.0]), np.array([1.0]), np.zeros(1))
    assert v == pytest.approx([0.0], abs=1e-15) and res <= 1e-12


# whole runs -------------------------------------------------------------------------

def test_run_free_motion_in_nu_time():
    scn = make_scenario(clock={"atoms": [{"t": 0.5, "size": 2.0}]}, initial={"u0": [0.0], "v0": [1.0]})
    P = build_partition(scn.clock, 0.1)
    traj = run(scn, P)
    assert np.all(traj.v == 1.0)
    expected = np.array([nu_mass(scn.clock, 0.0, t) for t in P.nodes])
    assert np.allclose(traj.u[:, 0], expected, rtol=1e-13, atol=1e-15)


def test_run_constant_force_first_order():
    g = 0.8
    errs = []
    for eps in (0.02, 0.01, 0.005):
        scn = make_scenario(perturbation={"e_poly": [[g]]}, initial={"u0": [0.0], "v0": [1.0]})
        traj = run(scn, build_partition(scn.clock, eps))
        t = traj.nodes
        errs.append(max(np.abs(traj.v[:, 0] - (1 - g * t)).max(),
                        np.abs(traj.u[:, 0] - (t - 0.5 * g * t * t)).max()))
    assert errs[0] < 0.05
    assert np.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.1)
    assert np.log2(errs[1] / errs[2]) == pytest.approx(1.0, abs=0.1)


def test_run_boundary_speed_is_stationary():
    scn = make_scenario(operator={"kind": "indicator", "set": {"type": "box", "lower": [-1.0], "upper": [1.0]}},
                        initial={"u0": [0.0], "v0": [1.0]})
    traj = run(scn, build_partition(scn.clock, 0.1))
    assert np.all(traj.v == 1.0)
    assert np.allclose(traj.u[:, 0], traj.nodes, atol=1e-15)
    assert np.all(traj.residuals == 0.0)


def test_run_rejects_initial_velocity_outside_domain():
    scn = make_scenario(operator={"kind": "indicator", "set": {"type": "box", "lower": [-1.0], "upper": [1.0]}},
                        initial={"u0": [0.0], "v0": [1.5]})
    with pytest.raises(DomainError, match="5.000e-01"):
        run(scn, build_partition(scn.clock, 0.1))


# interpolants and densities --------------------------------------------------------------

@pytest.fixture(scope="module")
def atom_traj():
    return run(shipped("jump_halfline"), build_partition(shipped("jump_halfline").clock, 0.05))


@pytest.fixture(scope="module")
def smooth_traj():
    scn = shipped("ode_reduction")
    return run(scn, build_partition(scn.clock, 0.05))


def test_node_consistency(smooth_traj, atom_traj):
    for traj in (smooth_traj, atom_traj):
        for i, t in enumerate(traj.nodes):
            u, v = interpolate(traj, t)
            assert np.array_equal(u, traj.u[i]) and np.array_equal(v, traj.v[i])


def test_left_limit_at_non_atom_node():
    scn = make_scenario(operator={"kind": "linear", "M": [[0.5]]}, initial={"u0": [0.0], "v0": [1.0]})
    traj = run(scn, build_partition(scn.clock, 0.1))
    for i in range(1, traj.partition.q + 1):
        _, v = interpolate(traj, traj.nodes[i] - 1e-10)
        assert v == pytest.approx(traj.v[i], abs=1e-8)


def test_midpoint_of_smooth_cell():
    scn = make_scenario(operator={"kind": "linear", "M": [[0.5]]}, initial={"u0": [0.2], "v0": [1.0]})
    traj = run(scn, build_partition(scn.clock, 0.1))
    i = 3
    mid = 0.5 * (traj.nodes[i] + traj.nodes[i + 1])
    u, _ = interpolate(traj, mid)
    assert u == pytest.approx(traj.u[i] + 0.5 * (traj.u[i + 1] - traj.u[i]), abs=1e-15)


def test_right_continuity(smooth_traj, atom_traj):
    for traj in (smooth_traj, atom_traj):
        for i in range(traj.partition.q):
            t = traj.nodes[i]
            gaps = []
            for e in (1e-4, 1e-6, 1e-8):
                u, v = interpolate(traj, t + e)
                gaps.append(np.linalg.norm(u - traj.u[i]) + np.linalg.norm(v - traj.v[i]))
            assert gaps[-1] <= 1e-6
            assert gaps[2] <= gaps[0] + 1e-12


def test_interpolate_out_of_range(smooth_traj):
    with pytest.raises(DomainError):
        interpolate(smooth_traj, 1.5)


def test_density_zero_for_free_motion():
    scn = make_scenario(initial={"u0": [0.0], "v0": [1.0]})
    traj = run(scn, build_partition(scn.clock, 0.1))
    for t in np.linspace(0, 1, 37):
        assert np.array_equal(density_dv(traj, t), [0.0])


def test_density_on_atom_cell_is_jump_quotient(atom_traj):
    P = atom_traj.partition
    j = P.node_index(0.5)
    dv = density_dv(atom_traj, 0.5)
    # at the atom the lambda-density vanishes
    assert dv == pytest.approx((atom_traj.v[j] - atom_traj.v[j - 1] + atom_traj.loads[j - 1]) / P.beta[j - 1])


def test_density_with_inactive_constraint_is_minus_force():
    g = 0.3
    scn = make_scenario(operator={"kind": "indicator", "set": {"type": "box", "lower": [-5.0], "upper": [5.0]}},
                        perturbation={"e_poly": [[g]]}, initial={"u0": [0.0], "v0": [0.0]})
    traj = run(scn, build_partition(scn.clock, 0.05))
    for t in (0.1, 0.33, 0.8):
        assert density_dv(traj, t) == pytest.approx([-g], abs=1e-12)


def test_density_matches_difference_quotient(smooth_traj):
    # d v_n / d nu inside a cell equals the nu-difference quotient of the interpolant
    P = smooth_traj.partition
    for i in (0, 5, 13):
        a = P.nodes[i] + 0.3 * P.eta[i]
        b = a + 1e-6
        va, vb = interpolate(smooth_traj, a)[1], interpolate(smooth_traj, b)[1]
        quotient = (vb - va) / nu_mass(P.clock, a, b)
        assert np.allclose(quotient, density_dv(smooth_traj, b), atol=1e-5)


def test_du_density_is_next_velocity(smooth_traj, atom_traj):
    for traj in (smooth_traj, atom_traj):
        P = traj.partition
        for i in range(P.q):
            t = P.nodes[i + 1]
            assert np.allclose(density_du(traj, t), traj.v[i + 1], rtol=1e-12, atol=1e-12)


# Gronwall --------------------------------------------------------------------------------------

def brute_force(alpha, beta, gamma, a0):
    a = [a0]
    for i in range(len(alpha)):
        a.append(alpha[i] + beta[i] * sum(a[:i]) + (1 + gamma[i]) * a[i])
    return np.array(a)


def test_gronwall_trivial_cases():
    assert np.array_equal(gronwall_bound(np.zeros(5), np.zeros(5), np.zeros(5), 1.0), np.ones(6))
    c = 0.3
    b = gronwall_bound(np.zeros(5), np.zeros(5), np.full(5, c), 1.0)
    assert np.all(b >= np.exp(c * np.arange(6)))
    assert np.allclose(b, np.exp(c * np.arange(6)), rtol=1e-13)


def test_gronwall_rejects_negative():
    with pytest.raises(DomainError):
        gronwall_bound([-1.0], [0.0], [0.0], 1.0)
    with pytest.raises(DomainError):
        gronwall_bound([1.0], [0.0], [0.0], -1.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 50).flatmap(lambda n: st.tuples(
    *[st.lists(st.floats(0, 2, allow_subnormal=False), min_size=n, max_size=n)] * 3,
    st.floats(0, 5))))
def test_gronwall_dominates_recursion(data):
    alpha, beta, gamma, a0 = data
    bound = gronwall_bound(alpha, beta, gamma, a0)
    assert np.all(bound >= brute_force(alpha, beta, gamma, a0))


# a priori bounds -------------------------------------------------------------------------------

def test_apriori_constants_for_zero_data():
    scn = make_scenario(constants={"gamma": 0.0, "c": 0.0, "m": 0.0})
    b = apriori_bounds(scn)
    assert (b.m1, b.c1, b.gamma1) == (1.0, 1.5, 0.0)
    assert b.m2 == pytest.approx(2.5 * np.exp(6.0), rel=1e-15)
    # hand evaluation of the remaining chain with |u0| = |v0| = 0, nu(I) = 1
    m3 = 2.5 * (1 + 2 * b.m2)
    assert b.m3 == pytest.approx(m3) and b.m4 == 0.0 and b.M == pytest.approx(m3)
    assert b.M5 == pytest.approx(b.M)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_runs_respect_bounds(name):
    scn = shipped(name)
    bounds = apriori_bounds(scn)
    P = build_partition(scn.clock, scn.epsilons[2])
    traj = run(scn, P)
    check_bounds(traj, bounds)
    assert traj.residuals.max() <= 1e-8
    du = np.linalg.norm(np.diff(traj.u, axis=0), axis=1)
    assert np.allclose(du, P.beta * np.linalg.norm(traj.v[1:], axis=1), rtol=1e-12, atol=1e-15)
    assert np.all(du <= bounds.M * P.beta)
    prev = np.r_[0.0, P.beta[:-1]]
    variation = np.linalg.norm(np.diff(traj.v, axis=0), axis=1).sum()
    assert variation <= np.sum(bounds.M * (P.beta + prev))
    assert max(np.linalg.norm(density_dv(traj, t)) for t in P.nodes) <= bounds.M5
