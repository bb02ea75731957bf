import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hsarma.exceptions import ConvergenceWarning
from hsarma.penalty import (
    admm_prox,
    block_shrink,
    build_groups,
    chain_penalty,
    hierarchy_violations,
    penalty_value,
    prox_log,
    prox_log_split,
)
from oracles import brute_force_prox, latent_objective, prefix_groups


def test_group_structure_example():
    gs = build_groups(2, 2)
    assert gs.one_based() == [[1], [1, 2], [3], [3, 4]]
    assert_allclose(gs.weights, [1, np.sqrt(2), 1, np.sqrt(2)])
    assert gs.n_groups == 4
    assert build_groups(3, 0).one_based() == [[1], [1, 2], [1, 2, 3]]
    with pytest.raises(ValueError):
        build_groups(0, 0)


def test_custom_weights():
    gs = build_groups(2, 1, weight=lambda k: 2.0 * k)
    assert_allclose(gs.weights, [2, 4, 2])


def test_block_shrink():
    assert_allclose(block_shrink([3.0, 4.0], 2.5), [1.5, 2.0])
    assert_array_equal(block_shrink([3.0, 4.0], 5.0), [0.0, 0.0])


def test_prox_scalar_is_soft_threshold():
    gs = build_groups(1, 0)
    assert_allclose(prox_log([2.0], 0.5, gs), [1.5], atol=1e-7)
    assert_array_equal(prox_log([0.3], 0.5, gs), [0.0])


def test_prox_lambda_zero_and_large():
    gs = build_groups(3, 2)
    b = np.array([1.0, -2.0, 0.5, 0.3, 0.1])
    assert_array_equal(prox_log(b, 0.0, gs), b)
    assert_array_equal(prox_log(b, 1e3, gs), np.zeros(5))


@pytest.mark.parametrize("seed", range(20))
def test_prox_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 4))
    q = int(rng.integers(0, 5 - p))
    b = rng.normal(scale=2.0, size=p + q)
    lam = [0.1, 1.0, 10.0][seed % 3]
    assert_allclose(prox_log(b, lam, build_groups(p, q)), brute_force_prox(b, lam, p, q), atol=1e-5)


def test_prox_optimality_against_perturbations(rng):
    # the prox value must be the minimum of lam*Omega(x) + |x - b|^2 / 2
    gs = build_groups(3, 3)
    lam = 0.7
    b = rng.normal(size=6)
    x = prox_log(b, lam, gs)
    f = lambda z: lam * penalty_value(z, gs) + 0.5 * np.sum((z - b) ** 2)
    fx = f(x)
    for _ in range(200):
        assert f(x + 1e-3 * rng.normal(size=6)) >= fx - 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_prox_outputs_are_hierarchical(seed):
    rng = np.random.default_rng(seed)
    gs = build_groups(5, 5)
    out = prox_log(rng.normal(size=10) * 2, 1.5, gs)
    assert hierarchy_violations(out[:5]) == 0
    assert hierarchy_violations(out[5:]) == 0


def test_split_equals_joint(rng):
    gs = build_groups(3, 3)
    for _ in range(20):
        b = rng.normal(size=6) * 2
        joint = prox_log(b, 0.8, gs)
        ar, ma = prox_log_split(b[:3], b[3:], 0.8, gs)
        assert_allclose(np.concatenate([ar, ma]), joint, atol=1e-6)


def test_admm_warns_when_capped():
    gs = build_groups(5, 5)
    b = np.linspace(-2, 2, 10)
    with pytest.warns(ConvergenceWarning):
        prox_log(b, 0.3, gs, max_iter=2)


def test_admm_numpy_and_numba_agree(rng):
    gs = build_groups(4, 3)
    b = rng.normal(size=7)
    a = admm_prox(b, 0.5, gs, max_iter=300, use_numba=True)
    c = admm_prox(b, 0.5, gs, max_iter=300, use_numba=False)
    assert a.iterations == c.iterations
    assert_allclose(a.beta, c.beta, atol=1e-12)


def test_admm_warm_start_is_cheaper(rng):
    gs = build_groups(5, 5)
    b = rng.normal(size=10)
    cold = admm_prox(b, 0.5, gs)
    warm = admm_prox(b + 1e-4, 0.5, gs, state=cold.state)
    assert warm.iterations < cold.iterations


def test_chain_penalty_small_cases():
    w = np.sqrt([1.0, 2.0])
    assert chain_penalty([1.0, 0.0], w) == pytest.approx(1.0)
    assert chain_penalty([0.0, 1.0], w) == pytest.approx(np.sqrt(2.0))
    assert chain_penalty([3.0], [1.0]) == pytest.approx(3.0)
    # all mass in the top group when both entries are equal: sqrt(2) * ||v||
    assert chain_penalty([1.0, 1.0], w) == pytest.approx(2.0)


def test_penalty_value_against_admm_and_primal_bound(rng):
    gs = build_groups(4, 3)
    groups, weights = prefix_groups(4, 3)
    for _ in range(10):
        beta = rng.normal(size=7) * (rng.random(7) < 0.8)
        exact = penalty_value(beta, gs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            approx = penalty_value(beta, gs, method="admm")
        assert approx == pytest.approx(exact, rel=1e-4, abs=1e-8)
        # any feasible latent split gives an upper bound
        naive = [np.zeros(len(g)) for g in groups]
        naive[3][:] = beta[:4]
        naive[6][:] = beta[4:]
        ub = latent_objective(naive, beta, 1.0, groups, weights)
        assert exact <= ub + 1e-12


def test_penalty_value_matches_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    for _ in range(5):
        d = int(rng.integers(2, 7))
        v = rng.normal(size=d)
        lat = [cp.Variable(k + 1) for k in range(d)]
        cons = [sum(lat[k][j] for k in range(j, d)) == v[j] for j in range(d)]
        prob = cp.Problem(cp.Minimize(sum(np.sqrt(k + 1) * cp.norm(lat[k]) for k in range(d))), cons)
        prob.solve()
        assert chain_penalty(v, np.sqrt(np.arange(1, d + 1))) == pytest.approx(prob.value, abs=1e-5)


def test_penalty_homogeneous_and_triangle(rng):
    gs = build_groups(3, 2)
    a, b = rng.normal(size=5), rng.normal(size=5)
    assert penalty_value(-2.5 * a, gs) == pytest.approx(2.5 * penalty_value(a, gs))
    assert penalty_value(a + b, gs) <= penalty_value(a, gs) + penalty_value(b, gs) + 1e-12


def test_hierarchy_violations():
    assert hierarchy_violations([1.0, 0.5, 0.0, 0.0]) == 0
    assert hierarchy_violations([1.0, 0.0, 0.5, 0.2]) == 2
    assert hierarchy_violations([0.0, 1e-9]) == 0
    assert hierarchy_violations([]) == 0
