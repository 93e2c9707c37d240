import numpy as np
import pytest

from catchup.errors import DomainError
from catchup.measure import BVClock
from catchup.operators import (
    L1Subdifferential, LinearOperator, MovingNormalCone, NormalCone, OperatorFamily,
    QuadraticSubdifferential, dis_estimate, domain_distance, graph_residual, growth_ratio,
    make_family, minimal_section, monotonicity_gap, resolvent,
)
from catchup.sets import Ball, Box, HalfSpace, Polyhedron

INTERVAL = NormalCone(Box([-1.0], [1.0]))
CLOCK = BVClock(1.0)


def static(op, kind="static"):
    return OperatorFamily(op, kind)


def all_kinds():
    return {
        "cone_box": NormalCone(Box([-1.0, -0.5], [1.0, 0.5])),
        "cone_ball": NormalCone(Ball([0.2, 0.0], 1.0)),
        "cone_poly": NormalCone(Polyhedron([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0])),
        "cone_half": NormalCone(HalfSpace([1.0, -1.0], 0.5)),
        "l1": L1Subdifferential(2, 0.7),
        "quadratic": QuadraticSubdifferential([[2.0, 0.5], [0.5, 1.0]]),
        "linear": LinearOperator([[0.5, 2.0], [-2.0, 0.1]]),
    }


# resolvent ----------------------------------------------------------------------

def test_linear_identity_resolvent_halves():
    fam = static(LinearOperator(np.eye(2)))
    assert np.allclose(resolvent(fam, 0.0, np.zeros(2), 1.0, [3.0, -1.0]), [1.5, -0.5], atol=1e-15)


@pytest.mark.parametrize("eta", [1e-3, 0.5, 7.0])
def test_interval_resolvent_is_projection(eta):
    assert resolvent(static(INTERVAL), 0.0, [0.0], eta, [3.0]) == pytest.approx([1.0])


def test_abs_soft_threshold():
    op = L1Subdifferential(1, 1.0)
    # 0 in z - 0.4 + [-1, 1] at z = 0
    assert op.resolvent(1.0, [0.4]) == pytest.approx([0.0])
    assert op.resolvent(1.0, [2.5]) == pytest.approx([1.5])
    assert op.resolvent(0.5, [-2.5]) == pytest.approx([-2.0])


def test_quadratic_resolvent_solves_linear_system():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = np.array([1.0, -2.0])
    z = QuadraticSubdifferential(Q).resolvent(0.3, x)
    assert np.allclose(z + 0.3 * Q @ z, x, atol=1e-14)


def test_resolvent_rejects_bad_eta():
    with pytest.raises(DomainError):
        INTERVAL.resolvent(0.0, [1.0])


@pytest.mark.parametrize("name", list(all_kinds()))
def test_resolvent_consistency(name, rng):
    op = all_kinds()[name]
    for _ in range(200):
        eta = 10 ** rng.uniform(-3, 1)
        x = rng.normal(0, 3, 2)
        y = op.resolvent(eta, x)
        assert op.graph_residual(y, (x - y) / eta) <= 1e-8
        assert op.domain_distance(y) <= 1e-10


@pytest.mark.parametrize("name", list(all_kinds()))
def test_monotone_on_sampled_graph(name):
    assert monotonicity_gap(all_kinds()[name], n=150, seed=3) >= -1e-10


# minimal section / residual / domain -------------------------------------------

def test_minimal_section_examples():
    assert np.array_equal(minimal_section(static(INTERVAL), 0, [0.0], [0.3]), [0.0])
    assert np.array_equal(minimal_section(static(INTERVAL), 0, [0.0], [1.0]), [0.0])
    absval = static(L1Subdifferential(1, 1.0))
    assert np.array_equal(minimal_section(absval, 0, [0.0], [0.0]), [0.0])
    assert np.array_equal(minimal_section(absval, 0, [0.0], [2.0]), [1.0])
    M = np.array([[1.0, 1.0], [-1.0, 1.0]])
    assert np.allclose(minimal_section(static(LinearOperator(M)), 0, np.zeros(2), [1.0, 0.0]), M @ [1.0, 0.0])
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(QuadraticSubdifferential(Q).minimal_section([1.0, 2.0]), Q @ [1.0, 2.0])


def test_minimal_section_outside_domain_raises():
    with pytest.raises(DomainError):
        INTERVAL.minimal_section([1.5])


def test_graph_residual_examples():
    fam = static(INTERVAL)
    assert graph_residual(fam, 0, [0.0], [1.0], [5.0]) == 0.0
    assert graph_residual(fam, 0, [0.0], [0.0], [1.0]) == pytest.approx(1.0)
    lin = static(LinearOperator(np.eye(2)))
    assert graph_residual(lin, 0, np.zeros(2), [1.0, 0.0], [1.0, 0.0]) == 0.0
    absval = L1Subdifferential(1, 1.0)
    assert absval.graph_residual([0.0], [0.5]) == 0.0
    assert absval.graph_residual([0.0], [1.5]) == pytest.approx(0.5)
    assert absval.graph_residual([2.0], [1.0]) == 0.0


def test_domain_distance_examples():
    lin = static(LinearOperator(np.eye(2)))
    assert domain_distance(lin, 0, np.zeros(2), [1e6, -3.0]) == 0.0
    ball = static(NormalCone(Ball([0.0, 0.0], 1.0)))
    assert domain_distance(ball, 0, np.zeros(2), [2.0, 0.0]) == pytest.approx(1.0)
    box = NormalCone(Box([0.0, 0.0], [1.0, 1.0]))
    y = np.array([2.0, 2.0])
    assert box.domain_distance(y) == pytest.approx(np.linalg.norm(y - box.project_domain(y)))
    assert box.domain_distance(y) == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("name", list(all_kinds()))
def test_growth_constant_dominates_samples(name):
    op = all_kinds()[name]
    assert growth_ratio(static(op), CLOCK, n=300, seed=1) <= op.c_growth + 1e-12


def test_operator_validation():
    with pytest.raises(DomainError):
        QuadraticSubdifferential([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DomainError):
        QuadraticSubdifferential([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        LinearOperator([[-1.0, 0.0], [0.0, 1.0]])


# moving families ------------------------------------------------------------------

def test_moving_halfline_drops_at_atom():
    clock = BVClock(1.0, atoms=[(0.5, 1.0)])
    fam = MovingNormalCone(HalfSpace([1.0], 1.0), clock, direction=[-1.0])
    assert fam.moving_set(0.49, [0.0]).offset == pytest.approx(1.0)
    assert fam.moving_set(0.5, [0.0]).offset == pytest.approx(0.0)
    assert fam.time_rate() == 1.0


def test_state_map_translation_and_gamma():
    L = np.array([[0.0, 0.3], [0.4, 0.0]])
    fam = MovingNormalCone(Ball([0.0, 0.0], 1.0), CLOCK, state_matrix=L)
    x = np.array([1.0, 2.0])
    assert np.allclose(fam.moving_set(0.0, x).center, L @ x)
    assert fam.gamma == pytest.approx(0.4)


def test_scale_rate_contributes_to_time_rate():
    clock = BVClock(1.0, ac_pieces=[(0.0, [0.5])])
    fam = MovingNormalCone(Ball([0.0, 0.0], 2.0), clock, direction=[0.3, 0.4], scale_rate=-0.2)
    assert fam.time_rate() == pytest.approx(0.5 + 0.2 * 2.0)
    assert fam.moving_set(1.0, np.zeros(2)).r == pytest.approx(2.0 * (1 - 0.2 * 0.5))


def test_scale_must_stay_positive():
    clock = BVClock(1.0, atoms=[(0.5, 3.0)])
    with pytest.raises(DomainError):
        MovingNormalCone(Ball([0.0], 1.0), clock, scale_rate=-0.5)


def test_make_family_kinds():
    box = {"type": "box", "lower": [-1.0], "upper": [1.0]}
    assert make_family({"kind": "indicator", "set": box}, CLOCK, 1).kind == "indicator"
    assert make_family({"kind": "normal_cone", "set": box}, CLOCK, 1).kind == "normal_cone"
    with pytest.raises(DomainError):
        make_family({"kind": "normal_cone", "set": box}, CLOCK, 2)
    with pytest.raises(DomainError):
        make_family({"kind": "mystery"}, CLOCK, 1)


# pseudo-distance ---------------------------------------------------------------------

def interval_graph(a, b, n_interior=401, multiples=np.logspace(-3, 6, 200)):
    """Dense grid over the graph of the normal cone of [a, b] in 1D."""
    xs = np.r_[np.linspace(a, b, n_interior), np.full(len(multiples), a), np.full(len(multiples), b)]
    ys = np.r_[np.zeros(n_interior), -multiples, multiples]
    return xs, ys


def grid_dis(ga, gb):
    (x, y), (xp, yp) = ga, gb
    num = (y[:, None] - yp[None, :]) * (xp[None, :] - x[:, None])
    den = 1 + np.abs(y)[:, None] + np.abs(yp)[None, :]
    return max(0.0, float(np.max(num / den)))


def test_dis_identical_operators_is_zero():
    assert dis_estimate(INTERVAL, INTERVAL, 2000, seed=0) == 0.0
    ball = NormalCone(Ball([0.0, 0.0], 1.0))
    assert dis_estimate(ball, NormalCone(Ball([0.0, 0.0], 1.0)), 2000, seed=1) == 0.0


def test_dis_translated_intervals_against_grid_oracle():
    h = 0.1
    oracle = grid_dis(interval_graph(-1, 1), interval_graph(-1 + h, 1 + h))
    assert oracle == pytest.approx(h, rel=1e-5)
    est = dis_estimate(INTERVAL, NormalCone(Box([-1 + h], [1 + h])), 100_000, seed=0)
    assert 0 < est <= oracle + 1e-3
    assert abs(est - oracle) <= 0.2 * oracle


def test_dis_rejects_zero_samples():
    with pytest.raises(DomainError):
        dis_estimate(INTERVAL, INTERVAL, 0)


def test_resolvent_distance_bound_for_translated_intervals(rng):
    # |x - J^B_eta(x)| <= eta |A0 x| + dis + sqrt(eta (1 + |A0 x|) dis) for x in D(A)
    for h in (0.05, 0.2, -0.3):
        B = NormalCone(Box([-1 + h], [1 + h]))
        dis = grid_dis(interval_graph(-1, 1), interval_graph(-1 + h, 1 + h))
        for _ in range(100):
            x = INTERVAL.project_domain(rng.uniform(-2, 2, 1))
            eta = 10 ** rng.uniform(-3, 1)
            a0 = np.linalg.norm(INTERVAL.minimal_section(x))
            bound = eta * a0 + dis + np.sqrt(eta * (1 + a0) * dis) + 1e-8
            assert np.linalg.norm(x - B.resolvent(eta, x)) <= bound
