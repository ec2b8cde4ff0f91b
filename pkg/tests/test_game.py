import numpy as np
import pytest

from eigdpp import game, solver
from eigdpp.dpp_operator import DppConfig
from eigdpp.eig_core import AlphaWeights
from eigdpp.errors import InvalidInput, NonTerminating
from eigdpp.frames import FrameFamily
from eigdpp.grid import BoundaryPayoff, Lattice

LINE = FrameFamily.canonical(1)
ONE = AlphaWeights([1.0])


def rnd(role):
    return game.Strategy(role, "random")


def walk_exit_oracle(eps):
    """Exit-right probability of the symmetric eps-walk on (-1, 1) started at 0, by a linear solve."""
    k = int(round(1 / eps))
    m = 2 * k - 1  # interior states -k+1 .. k-1
    A = np.eye(m)
    b = np.zeros(m)
    for i in range(m):
        for nb in (i - 1, i + 1):
            if 0 <= nb < m:
                A[i, nb] -= 0.5
            elif nb == m:
                b[i] += 0.5
    return np.linalg.solve(A, b)[k - 1]


def test_counter_rng_deterministic_and_uniform():
    ids = np.arange(100000)
    a = game.counter_uniform(3, ids, 7, 2)
    np.testing.assert_array_equal(a, game.counter_uniform(3, ids, 7, 2))
    assert np.all((a >= 0) & (a < 1))
    assert abs(a.mean() - 0.5) < 0.005
    assert not np.array_equal(a, game.counter_uniform(3, ids, 7, 3))
    assert not np.array_equal(a, game.counter_uniform(4, ids, 7, 2))


def test_one_dimensional_walk_is_fair():
    G = BoundaryPayoff.from_expression("clip(x1, -1, 1)", 1)
    est = game.estimate_value([0.0], G, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 20000, seed=1, weights=ONE)
    assert abs(est.mean) <= 4 * est.se


def test_exit_probability():
    G = BoundaryPayoff.from_expression("where(x1 >= 1 - 1e-9, 1.0, 0.0)", 1)
    oracle = walk_exit_oracle(0.1)
    assert oracle == pytest.approx(0.5)
    est = game.estimate_value([0.0], G, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 100000, seed=2, weights=ONE)
    assert abs(est.mean - oracle) <= 3 * est.se


def test_constant_payoff():
    est = game.estimate_value([0.2, 0.1], BoundaryPayoff.constant(4.0), 0.2, FrameFamily.canonical(2),
                              rnd("subspace_picker"), rnd("vector_picker"), 50, seed=0, weights=AlphaWeights.uniform(2))
    assert est.mean == 4.0 and est.se == 0.0
    mean, se, trials = est
    assert trials == 50


def test_record_invariants():
    G = BoundaryPayoff.from_expression("x1 + x2**2", 2)
    fam = FrameFamily.random(2, 3, seed=0, dirs_per_subspace=3)
    rec = game.play_general([0.3, -0.2], G, AlphaWeights([0.3, 0.7]), 0.1, fam, rnd("subspace_picker"), rnd("vector_picker"), seed=5)
    steps = np.linalg.norm(np.diff(rec.positions, axis=0), axis=1)
    np.testing.assert_allclose(steps, 0.1, atol=1e-12)
    assert not np.all(np.abs(rec.exit_point) < 1)
    assert np.all(np.abs(rec.positions[:-1]) < 1)
    assert rec.payoff == G(rec.exit_point)[0]
    assert rec.steps == len(rec.choices) == rec.positions.shape[0] - 1
    again = game.play_general([0.3, -0.2], G, AlphaWeights([0.3, 0.7]), 0.1, fam, rnd("subspace_picker"), rnd("vector_picker"), seed=5)
    np.testing.assert_array_equal(rec.positions, again.positions)
    assert {c[0] for c in rec.choices} <= {1, 2}


def test_forced_outward_exit_in_one_step():
    G = BoundaryPayoff.from_expression("x1", 1)
    s = game.Strategy("vector_picker", "fixed", direction=(1.0,))
    rec = game.play_general([0.95], G, ONE, 0.1, LINE, rnd("subspace_picker"), s, seed=0)
    hits = [game.play_general([0.95], G, ONE, 0.1, LINE, rnd("subspace_picker"), s, seed=k).steps for k in range(20)]
    assert rec.steps >= 1 and 1 in hits


def test_extremal_matches_general_in_one_dimension():
    G = BoundaryPayoff.from_expression("x1**2", 1)
    a, _ = game.simulate_payoffs([0.1], G, 0.1, LINE, rnd("coin_winner"), rnd("coin_winner"), 2000, 3, variant="extremal")
    b, _ = game.simulate_payoffs([0.1], G, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 2000, 3, weights=ONE)
    # only +-e1 is available, so both games are the same walk; the sign stream is shared
    np.testing.assert_array_equal(a, b)


def test_threads_and_order_do_not_matter():
    G = BoundaryPayoff.from_expression("x1 * x2", 2)
    args = ([0.1, 0.2], G, 0.1, FrameFamily.canonical(2), rnd("subspace_picker"), rnd("vector_picker"), 3000, 11)
    p1, s1 = game.simulate_payoffs(*args, weights=AlphaWeights.uniform(2), threads=1)
    p3, s3 = game.simulate_payoffs(*args, weights=AlphaWeights.uniform(2), threads=3)
    np.testing.assert_array_equal(p1, p3)
    np.testing.assert_array_equal(s1, s3)
    # trajectory k is the same whether played alone or in a batch
    rec = game.play_general([0.1, 0.2], G, AlphaWeights.uniform(2), 0.1, FrameFamily.canonical(2), rnd("subspace_picker"), rnd("vector_picker"), 11, traj=1234)
    assert rec.payoff == p1[1234] and rec.steps == s1[1234]


def test_step_cap():
    with pytest.raises(NonTerminating):
        game.estimate_value([0.0], BoundaryPayoff.constant(0.0), 0.01, LINE, rnd("subspace_picker"), rnd("vector_picker"), 10, weights=ONE, step_cap=5)


@pytest.mark.parametrize(
    "kwargs",
    [dict(role="picker"), dict(role="vector_picker", policy="smart"), dict(role="vector_picker", policy="greedy"), dict(role="vector_picker", policy="fixed")],
)
def test_strategy_validation(kwargs):
    with pytest.raises(InvalidInput):
        game.Strategy(**kwargs)


def test_game_validation():
    G = BoundaryPayoff.constant(0.0)
    with pytest.raises(InvalidInput):
        game.play_general([1.0], G, ONE, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 0)
    with pytest.raises(InvalidInput):
        game.play_general([0.0], G, ONE, 0.1, LINE, rnd("vector_picker"), rnd("subspace_picker"), 0)
    with pytest.raises(InvalidInput):
        game.play_extremal([0.0], G, 0.1, rnd("subspace_picker"), rnd("coin_winner"), 0)
    with pytest.raises(InvalidInput):
        game.estimate_value([0.0], G, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 0, weights=ONE)
    with pytest.raises(InvalidInput):
        game.simulate_payoffs([0.0], G, 0.1, LINE, rnd("subspace_picker"), rnd("vector_picker"), 5, 0)


@pytest.fixture(scope="module")
def solved_field():
    eps = 0.2
    lat = Lattice(2, -1.0, 1.0, 0.05, eps)
    G = BoundaryPayoff.from_expression("x1**2 + 0.5*x2", 2)
    u, rep = solver.solve("extremal", DppConfig(eps, AlphaWeights.extremal(2), FrameFamily.canonical(2)), G, lat)
    assert rep.converged
    return u, G, eps


def test_greedy_greedy_tracks_solver(solved_field):
    u, G, eps = solved_field
    x0 = np.array([0.2, -0.1])
    smax = game.Strategy("coin_winner", "greedy", field=u)
    smin = game.Strategy("coin_winner", "greedy", field=u)
    est = game.estimate_value(x0, G, eps, FrameFamily.canonical(2), smax, smin, 4000, seed=3, variant="extremal")
    assert abs(est.mean - u(x0)) <= max(3 * est.se, 2 * eps)


def test_strategy_sandwich(solved_field):
    u, G, eps = solved_field
    x0 = np.array([-0.3, 0.3])
    greedy = game.Strategy("coin_winner", "greedy", field=u)
    kw = dict(variant="extremal")
    hi = game.estimate_value(x0, G, eps, FrameFamily.canonical(2), greedy, rnd("coin_winner"), 4000, 4, **kw)
    lo = game.estimate_value(x0, G, eps, FrameFamily.canonical(2), rnd("coin_winner"), greedy, 4000, 4, **kw)
    assert hi.mean >= u(x0) - 3 * hi.se - 2 * eps
    assert lo.mean <= u(x0) + 3 * lo.se + 2 * eps


def test_trajectory_csv(tmp_path):
    G = BoundaryPayoff.from_expression("x1", 1)
    recs = [game.play_general([0.0], G, ONE, 0.25, LINE, rnd("subspace_picker"), rnd("vector_picker"), 0, traj=t) for t in range(3)]
    lines = game.write_trajectories_csv(tmp_path / "t.csv", recs, 1).read_text().splitlines()
    assert lines[0] == "traj,step,x1,j,sign"
    assert len(lines) == 1 + sum(r.steps + 1 for r in recs)
