import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eigdpp import coupling as cp
from eigdpp.eig_core import AlphaWeights
from eigdpp.errors import DegenerateState, InvalidInput, PreconditionViolated

E = np.eye(3)
SMALL = cp.BarrierParams(0.25, 2.0, 800, 1.0)


def unit_vectors(n):
    return st.lists(st.floats(-1, 1), min_size=n, max_size=n).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
        lambda v: np.asarray(v) / np.linalg.norm(v)
    )


@pytest.mark.parametrize(
    "v, y, expected",
    [(E[0], E[0], [0, 0, 0]), (E[1], E[0], E[1]), ((E[0] + E[1]) / math.sqrt(2), E[0], E[1] / math.sqrt(2))],
)
def test_perp_component(v, y, expected):
    np.testing.assert_allclose(cp.perp_component(v, y), expected, atol=1e-15)


@given(unit_vectors(3), unit_vectors(3))
def test_perp_orthogonal(v, y):
    assert abs(cp.perp_component(v, 2.5 * y) @ y) <= 1e-12


def test_degenerate_y():
    with pytest.raises(DegenerateState):
        cp.perp_component(E[0], np.zeros(3))
    with pytest.raises(DegenerateState):
        cp.select_rule(E[0], E[1], np.zeros(3))
    with pytest.raises(DegenerateState):
        cp.mirror_map(E[0], cp.CoupledState(np.ones(3), np.ones(3)))


@pytest.mark.parametrize(
    "v, w, y, rule",
    [(E[1], -E[1], E[0], cp.RULE_II), (E[1], E[2], E[0], cp.RULE_I), (E[0], E[0], E[0], cp.RULE_I)],
)
def test_select_rule(v, w, y, rule):
    assert cp.select_rule(v, w, y) == rule


def sqdist(x, z):
    return float(np.sum((np.asarray(x) - np.asarray(z)) ** 2))


def test_F_eval_distance_laws():
    eps = 0.05
    s = cp.CoupledState([0.3, 0.0, 0.0], [0.0, 0.0, 0.0])
    d2 = sqdist(s.x, s.z)
    assert cp.F_eval(s, E[1], -E[1], sqdist, eps) == pytest.approx(d2, abs=1e-15)
    assert cp.F_eval(s, E[1], E[2], sqdist, eps) == pytest.approx(d2 + 2 * eps**2, abs=1e-15)
    assert cp.F_eval(s, E[1], E[2], lambda x, z: 7.0, eps) == 7.0
    # the forbidden pairing (rule i with w = -v perp y) would grow by 4 eps^2
    assert sqdist(s.x + eps * E[1], s.z - eps * E[1]) == pytest.approx(d2 + 4 * eps**2)
    assert cp.select_rule(E[1], -E[1], s.y) == cp.RULE_II


@given(unit_vectors(3), unit_vectors(3), unit_vectors(3))
def test_perp_bound(v, w, y):
    rule, d = cp.moved_difference(v, w, y)
    dp = cp.perp_component(d, y)
    assert dp @ dp <= 2.0 + 1e-12
    if rule == cp.RULE_I:
        vp, wp = cp.perp_component(v, y), cp.perp_component(w, y)
        assert not (vp @ vp + wp @ wp > 1 and vp @ wp < 0)


@given(unit_vectors(3), unit_vectors(3))
def test_mirror_isometric_involution(h, y):
    s = cp.CoupledState(y, np.zeros(3))
    m = cp.mirror_map(h, s)
    np.testing.assert_allclose(cp.mirror_map(m, s), h, atol=1e-14)
    assert np.linalg.norm(m) == pytest.approx(np.linalg.norm(h))
    np.testing.assert_allclose(m @ y, -(h @ y), atol=1e-14)


def test_mirror_examples():
    s = cp.CoupledState([1.0, 0.0], [0.0, 0.0])
    np.testing.assert_allclose(cp.mirror_map([1.0, 1.0], s), [-1.0, 1.0])
    np.testing.assert_allclose(cp.mirror_map([0.0, 2.0], s), [0.0, 2.0])
    np.testing.assert_allclose(cp.mirror_map(s.y, s), -s.y)


def test_barrier_f1():
    assert cp.barrier_f1(cp.CoupledState([0.0, 0.0], [0.0, 0.0]), SMALL) == 0.0
    bp = cp.BarrierParams(0.25, 2.0, 800, 1.0)
    assert cp.barrier_f1(cp.CoupledState([1.0, 0.0], [0.0, 0.0]), bp) == pytest.approx(3.0)
    x = np.array([0.3, -0.2])
    assert cp.barrier_f1(cp.CoupledState(x, -x), bp) == pytest.approx(2.0 * np.linalg.norm(2 * x) ** 0.25)


@pytest.mark.parametrize("eps", [0.1, 0.3, 1e-6, 0.07])
def test_annulus_index(eps):
    N = 50
    x = np.zeros(2)
    assert cp.annulus_index(cp.CoupledState(x, x), eps, N) == 0
    assert cp.annulus_index(cp.CoupledState([eps / 10, 0.0], x), eps, N) == 1
    assert cp.annulus_index(cp.CoupledState([eps / 10 * 1.0000001, 0.0], x), eps, N) == 2
    assert cp.annulus_index(cp.CoupledState([N * eps / 10, 0.0], x), eps, N) == N
    assert cp.annulus_index(cp.CoupledState([N * eps / 10 + eps / 40, 0.0], x), eps, N) is None


def test_barrier_f2_values():
    bp = SimpleNamespace(delta=0.5, C=3.0, N=4, log_C=math.log(3.0))
    s = cp.CoupledState([0.015, 0.0], [0.0, 0.0])  # |y| = 0.015 lies in A_2 at eps = 0.1
    # 3^4 * 0.1^0.5 = 25.61445
    assert cp.barrier_f2(s, bp, 0.1) == pytest.approx(81 * math.sqrt(0.1), rel=1e-15)
    assert cp.barrier_f2(cp.CoupledState([0.05, 0.0], [0.0, 0.0]), bp, 0.1) == 0.0
    assert cp.barrier_f2(cp.CoupledState([0.04, 0.0], [0.0, 0.0]), bp, 0.1) == pytest.approx(0.1**0.5)


@given(st.floats(1e-4, 0.2), st.integers(1, 800))
def test_f2_log_matches_linear(eps, i):
    r = (i - 0.5) * eps / 10
    s = cp.CoupledState([r, 0.0], [0.0, 0.0])
    lin = cp.barrier_f2(s, SMALL, eps)
    if 0 < lin < math.inf:
        assert math.exp(cp.barrier_f2(s, SMALL, eps, log_domain=True)) == pytest.approx(lin, rel=1e-12)


def test_f2_log_at_theorem_scale():
    bp = cp.choose_constants(0.3, 4.0)
    s = cp.CoupledState([1e-7, 0.0], [0.0, 0.0])
    assert cp.barrier_f2(s, bp, 1e-6) == math.inf
    assert cp.barrier_f2(s, bp, 1e-6, log_domain=True) == pytest.approx(2 * (bp.N - 1) * math.log(bp.C) + 0.3 * math.log(1e-6))


def test_taylor_examples(rng):
    s = cp.CoupledState([0.4, 0.1], [-0.2, 0.3])
    f = cp.barrier_f1(s, SMALL)
    assert cp.taylor_f1(s, np.zeros(2), np.zeros(2), SMALL) == f
    h = np.array([0.01, -0.02])
    exact = cp.barrier_f1(cp.CoupledState(s.x + h, s.z + h), SMALL)
    assert cp.taylor_f1(s, h, h, SMALL) == pytest.approx(exact, abs=1e-14)
    hx, hz = rng.standard_normal(2) * 0.01, rng.standard_normal(2) * 0.01
    avg = 0.5 * (cp.taylor_f1(s, hx, hz, SMALL) + cp.taylor_f1(s, -hx, -hz, SMALL)) - f
    y = s.y
    r = np.linalg.norm(y)
    d = hx - hz
    dV = d @ y / r
    second = 0.5 * SMALL.C * SMALL.delta * r ** (SMALL.delta - 2) * ((SMALL.delta - 1) * dV**2 + d @ d - dV**2) + (hx + hz) @ (hx + hz)
    assert avg == pytest.approx(second, rel=1e-12)


def test_taylor_remainder_within_raw_bound(rng):
    eps = 0.01
    for _ in range(500):
        x, z = rng.uniform(-1, 1, (2, 3))
        s = cp.CoupledState(x, z)
        if np.linalg.norm(s.y) <= 2 * eps:
            continue
        hx = cp.random_unit(rng, 3) * eps * rng.random()
        hz = cp.random_unit(rng, 3) * eps * rng.random()
        exact = cp.barrier_f1(cp.CoupledState(x + hx, z + hz), SMALL)
        err = abs(exact - cp.taylor_f1(s, hx, hz, SMALL))
        assert err <= cp.raw_error_bound(s, float(np.linalg.norm(np.concatenate([hx, hz]))), eps, SMALL) + 1e-14


def test_error_bound():
    s = cp.CoupledState([1.0, 0.0], [0.0, 0.0])
    assert cp.error_bound(s, 1e-3, SMALL) == pytest.approx(1e-5)
    near = cp.CoupledState([0.0015, 0.0], [0.0, 0.0])
    with pytest.raises(PreconditionViolated):
        cp.error_bound(near, 1e-3, SMALL)
    with pytest.raises(PreconditionViolated):
        cp.error_bound(cp.CoupledState([0.05, 0.0], [0.0, 0.0]), 1e-3, SMALL)
    with pytest.raises(PreconditionViolated):
        cp.error_bound(s, 1e-3, cp.BarrierParams(0.25, 2.0, 10, 1.0))
    assert cp.error_bound(cp.CoupledState([0.5, 0.0], [0.0, 0.0]), 1e-3, SMALL) > cp.error_bound(s, 1e-3, SMALL)


def test_choose_constants():
    bp = cp.choose_constants(0.25, 4.0)
    assert bp.C == pytest.approx(884.0773439350246, rel=1e-13)
    # N = ceil(100 C / delta) with the unrounded C
    assert bp.N == 353631
    lhs = 2 * bp.C * bp.delta**2 - bp.C * bp.delta + 20
    assert lhs == pytest.approx(-(4.0 + 4) / 4 ** (0.25 - 2), rel=1e-12)
    Cs = [cp.choose_constants(d, 4.0).C for d in (0.4, 0.45, 0.49, 0.499)]
    assert Cs == sorted(Cs)
    for bad in (0.5, 0.7, 0.0, -0.1):
        with pytest.raises(InvalidInput, match=r"\(0, 1/2\)"):
            cp.choose_constants(bad, 4.0)
    with pytest.raises(InvalidInput):
        cp.choose_constants(0.3, 0.0)


def test_feasibility_and_split():
    w = AlphaWeights([0.3, 0.4, 0.3])
    assert w.alpha == pytest.approx(0.6) and w.beta == pytest.approx(0.4)
    assert cp.feasibility_bound(w) == pytest.approx(8 / 3)
    assert cp.ladder_factor(None) == 6.0
    assert cp.ladder_factor(w) == pytest.approx(8 * 0.4 / 0.6 + 6)


def test_even_power_excess_matches_direct():
    rng = np.random.default_rng(1)
    b = rng.uniform(-0.5, 0.5, 200)
    c = rng.uniform(0, 0.3, 200)
    direct = 0.5 * ((1 + c + b) ** 0.15 + (1 + c - b) ** 0.15) - 1
    np.testing.assert_allclose(cp._even_power_excess(b, c, 0.15), direct, rtol=1e-10, atol=1e-15)
    # tiny arguments keep the second-order term that the direct form loses
    b, c, a = 1e-9, 0.0, 0.15
    assert cp._even_power_excess(b, c, a) == pytest.approx(a * (a - 1) / 2 * b * b, rel=1e-6)


def test_delta_F_matches_direct_difference(rng):
    eps = 0.01
    for _ in range(50):
        x, z = rng.uniform(-1, 1, (2, 3))
        V, W = cp.random_unit(rng, (20, 3)), cp.random_unit(rng, (20, 3))
        A, B, _ = cp.coupled_moves(x - z, V, W)
        s = cp.CoupledState(x, z)
        f = cp.barrier_f1(s, SMALL)
        direct = [0.5 * (cp.barrier_f1(cp.CoupledState(x + eps * a, z + eps * b), SMALL)
                         + cp.barrier_f1(cp.CoupledState(x - eps * a, z - eps * b), SMALL)) - f for a, b in zip(A, B)]
        np.testing.assert_allclose(cp.delta_F_f1(x - z, A, B, eps, SMALL), direct, rtol=1e-9, atol=1e-12)


def test_diagonal_coupling_adds_four_eps2(rng):
    eps = 1e-3
    for _ in range(20):
        x, z = rng.uniform(-1, 1, (2, 2))
        v = cp.random_unit(rng, (1, 2))
        assert cp.delta_F_f1(x - z, v, v, eps, SMALL)[0] == pytest.approx(4 * eps**2, rel=1e-12)


def test_structured_candidates_cover_worst_cases():
    y = np.array([0.3, 0.4, 0.0])
    V, W = cp.structured_candidates(y)
    yh = y / 0.5
    pairs = {(tuple(np.round(v, 12)), tuple(np.round(w, 12))) for v, w in zip(V, W)}
    assert (tuple(np.round(yh, 12)), tuple(np.round(-yh, 12))) in pairs
    assert V.shape == W.shape and np.allclose(np.linalg.norm(V, axis=1), 1) and np.allclose(np.linalg.norm(W, axis=1), 1)
    # v = yhat, w = -yhat moves along y only, with (delta - 1)(2)^2 as leading coefficient
    val = cp.delta_F_f1(y, yh[None], -yh[None], 1e-4, SMALL)[0]
    lead = 0.5 * SMALL.C * SMALL.delta * 0.5 ** (SMALL.delta - 2) * (SMALL.delta - 1) * 4 * 1e-8
    assert val == pytest.approx(lead, rel=1e-3)


def test_step_down_pair():
    eps = 1e-3
    y = np.array([0.0123, 0.004])
    r = np.linalg.norm(y)
    v, w = cp.step_down_pair(y, eps, r - 1.5 * eps)
    assert cp.select_rule(v, w, y) == cp.RULE_I
    assert np.linalg.norm(y + eps * (v - w)) == pytest.approx(r - 1.5 * eps)
    with pytest.raises(PreconditionViolated):
        cp.step_down_pair(y, eps, r - 3 * eps)
    with pytest.raises(PreconditionViolated):
        cp.step_down_pair(np.array([0.5]), eps, 0.4995)


@pytest.fixture(scope="module")
def theorem_params():
    return cp.choose_constants(0.3, 4.0)


def test_extremal_check_far(theorem_params):
    eps = 1e-6
    xs, zs = cp.sample_far(2, 200, 0, theorem_params.near_radius(eps))
    rep = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=200, seed=0)
    assert rep.ok and rep.regime_counts["far"] == 200
    assert rep.worst_margin < -theorem_params.C_tilde
    assert rep.note.startswith("empirical, not certified")


def test_extremal_check_near_and_diagonal(theorem_params):
    eps = 1e-6
    x, z, idx = cp.sample_near(3, 100, 1, eps, 1, theorem_params.N)
    xs = np.vstack([x, [[0.1, 0.2, 0.3]]])
    zs = np.vstack([z, [[0.1, 0.2, 0.3]]])
    rep = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=100, seed=1)
    assert rep.ok
    assert rep.regime_counts == {"diagonal": 1, "near": 100, "far": 0}
    assert rep.details["near_max_f1_jump_over_C_eps_delta"] <= 3.0
    assert rep.details["near_min_ladder_log_slack"] > 0


def test_ladder_table(theorem_params):
    t = cp.ladder_table(theorem_params, 1e-6)
    assert t["annuli"] == theorem_params.N and t["violations"] == 0


def test_ladder_table_detects_small_C():
    bp = cp.BarrierParams(0.3, 1.5, 10, 1.0)
    assert cp.ladder_table(bp, 1e-6)["violations"] > 0


def test_general_reduces_to_extremal(theorem_params):
    eps = 1e-6
    xs, zs = cp.sample_far(3, 50, 2, theorem_params.near_radius(eps))
    a = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=50, seed=3)
    b = cp.check_general_inequality((xs, zs), theorem_params, AlphaWeights.extremal(3), eps, direction_budget=50, seed=3)
    np.testing.assert_array_equal(a.margins, b.margins)
    assert a.violations == b.violations


def test_general_check_feasible():
    w = AlphaWeights([0.3, 0.4, 0.3])
    bp = cp.choose_constants(0.3, cp.feasibility_bound(w) + 1.0)
    eps = 1e-6
    xs, zs = cp.sample_far(3, 100, 4, bp.near_radius(eps))
    rep = cp.check_general_inequality((xs, zs), bp, w, eps, direction_budget=100, seed=4)
    assert rep.ok and rep.details["feasible"]
    assert rep.details["diagonal_coupling_excess_over_eps2"] == pytest.approx(4.0, rel=1e-6)


def test_check_is_thread_independent(theorem_params):
    eps = 1e-6
    xs, zs = cp.sample_far(2, 600, 5, theorem_params.near_radius(eps))
    a = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=20, seed=9, threads=1)
    b = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=20, seed=9, threads=3)
    assert a.to_dict() == b.to_dict()
    np.testing.assert_array_equal(a.margins, b.margins)


def test_check_validation(theorem_params):
    with pytest.raises(InvalidInput):
        cp.check_extremal_inequality((np.zeros((2, 1)), np.ones((2, 1))), theorem_params, 1e-6)
    with pytest.raises(InvalidInput):
        cp.check_extremal_inequality((np.zeros((2, 2)), np.ones((3, 2))), theorem_params, 1e-6)
    with pytest.raises(InvalidInput):
        cp.sample_far(2, 10, 0, 2.5)


def test_report_outputs(tmp_path, theorem_params):
    eps = 1e-6
    xs, zs = cp.sample_far(2, 5, 0, theorem_params.near_radius(eps))
    rep = cp.check_extremal_inequality((xs, zs), theorem_params, eps, direction_budget=5)
    d = rep.to_dict()
    assert {"samples", "violations", "worst_margin", "regime_counts"} <= set(d)
    assert rep.write_json(tmp_path / "c.json").exists()
    assert len(rep.write_csv(tmp_path / "c.csv").read_text().splitlines()) == 6


@pytest.mark.parametrize("p", [2, 3, 4, 10])
def test_dominative_constants(p):
    dbp = cp.DominativeBarrierParams(0.05, 4.0**-2, 2, p)
    b1, b2 = dbp.C_tilde_branches
    assert b1 > 0 and b2 > 0
    assert dbp.target_coefficient < 0
    assert dbp.C == pytest.approx(1e10 / (0.05**2 / 16))
    eps = 1e-12
    r = 2 * dbp.N * eps / 10
    assert cp.K_bound(r, eps, dbp) == pytest.approx(r ** (0.05 - 2) * (10 - dbp.C * 0.05 / 16))
    assert cp.K_bound(r, eps, dbp) < 0


@pytest.mark.parametrize("kw", [dict(delta=0.1), dict(omega=0.1), dict(p=1.5)])
def test_dominative_params_invalid(kw):
    args = dict(delta=0.05, omega=1 / 16, n=2, p=2.0)
    args.update(kw)
    with pytest.raises(InvalidInput):
        cp.DominativeBarrierParams(**args)


def test_dominative_check_small():
    dbp = cp.DominativeBarrierParams(0.05, 4.0**-2, 2, 2.0)
    assert dbp.q == 1.0
    xs, zs = cp.sample_dominative_states(2, 60, 0, 1e-2)
    rep = cp.check_dominative_inequality((xs, zs), dbp, 1e-2, quadrature=8)
    assert rep.ok and rep.samples == 60
    assert rep.regime_counts["near"] + rep.regime_counts["far"] + rep.regime_counts["diagonal"] == 60


def test_dominative_far_keeps_second_order():
    dbp = cp.DominativeBarrierParams(0.05, 4.0**-2, 2, 3.0)
    pts, wts = cp.ball_quadrature(2, 8)
    eps = 1e-19
    violated, gap, regime = cp.dominative_sample([0.5, 0.0], [-0.3, 0.1], dbp, eps, pts, wts)
    assert regime == "far" and not violated and gap > 0
