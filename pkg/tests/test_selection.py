import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hsarma.exceptions import SamplingError
from hsarma.selection import (
    BenchReport,
    PathFailure,
    PathSpec,
    bic,
    estimation_error,
    fit_fixed_order,
    forecast_rmse,
    gen_true_model,
    lambda_path,
    run_table1,
    select_bic,
)
from hsarma.series import ArmaParams, simulate
from hsarma.solver import FitConfig, FitResult, fit
from hsarma.stability import is_member, max_root_modulus


@pytest.mark.parametrize("p,q", [(1, 0), (0, 2), (3, 2), (5, 5)])
def test_gen_true_model_shapes_and_stability(p, q):
    m = gen_true_model(p, q, seed=7)
    assert m.phi.size == p and m.theta.size == q
    assert is_member(m.phi, 0.0) and is_member(m.theta, 0.0)
    assert np.all(np.abs(m.beta) >= 0.1) and np.all(np.abs(m.beta) <= 1.0)


def test_gen_true_model_seeded():
    assert gen_true_model(3, 2, seed=1) == gen_true_model(3, 2, seed=1)
    assert gen_true_model(3, 2, seed=1) != gen_true_model(3, 2, seed=2)


def test_gen_true_model_root_cap():
    m = gen_true_model(4, 3, seed=0, root_cap=0.99)
    assert max_root_modulus(m.phi) == pytest.approx(0.99, abs=1e-9)
    assert max_root_modulus(m.theta) == pytest.approx(0.99, abs=1e-9)


def test_gen_true_model_errors():
    with pytest.raises(SamplingError):
        gen_true_model(8, 0, seed=0, max_draws=1)
    with pytest.raises(ValueError):
        gen_true_model(0, 0)
    with pytest.raises(ValueError):
        gen_true_model(2, 0, root_cap=1.0)


def test_estimation_error_pads():
    a = ArmaParams([0.3], [])
    b = ArmaParams([0.0, 0.4], [0.0])
    assert estimation_error(a, b) == pytest.approx(0.5)
    assert estimation_error(b, b) == 0.0


def test_pathspec_validation():
    assert_allclose(PathSpec(lambda0_grid=(1, 2)).lambdas(100), [10, 20])
    assert_allclose(PathSpec.log_spaced(1, 100, 3).lambdas(5), [1, 10, 100])
    assert_allclose(PathSpec.log_spaced(2, 2, 1).lambdas(5), [2])
    for bad in [dict(lambda0_grid=()), dict(lambda0_grid=(2, 1)), dict(lambda0_grid=(0, 1)),
                dict(lambda_min=1, lambda_max=2), dict(lambda_min=2, lambda_max=1, count=3),
                dict(lambda0_grid=(1,), count=3)]:
        with pytest.raises(ValueError):
            PathSpec(**bad)


def test_singleton_path_equals_direct_fit(arma32):
    _, ts = arma32
    cfg = FitConfig(lam=0.0, p_cap=3, q_cap=3)
    [res] = lambda_path(ts, PathSpec(lambda0_grid=(2.0,)), cfg)
    direct = fit(ts, FitConfig.from_lambda0(2.0, ts.T, 3, 3))
    assert_array_equal(res.params.beta, direct.params.beta)


def test_path_orders_shrink(arma32):
    _, ts = arma32
    path = lambda_path(ts, PathSpec(lambda0_grid=(0.5, 5, 50, 500)), FitConfig(0.0, 5, 5))
    sizes = [r.order_p + r.order_q for r in path]
    assert sizes[-1] == 0
    assert sizes == sorted(sizes, reverse=True)


def test_bic_and_selection(arma32):
    truth, ts = arma32
    y = ts.values
    zero = FitResult(ArmaParams.zeros(3, 3), 0, 0, 10.0, [], True, 1)
    good = fit_fixed_order(y, 3, 2)
    t_eff = y.size - 3
    assert bic(zero, y) == pytest.approx(t_eff * math.log(np.sum(y[3:] ** 2) / t_eff))
    assert select_bic([zero], y) is zero
    assert select_bic([PathFailure(1.0, "boom"), good, zero], y) is good
    twin = FitResult(good.params, good.order_p, good.order_q, good.lam + 1, [], True, 1)
    assert select_bic([good, twin], y) is twin
    with pytest.raises(ValueError):
        select_bic([PathFailure(1.0, "boom")], y)


def test_fixed_order_fit_close_to_truth(arma32):
    truth, ts = arma32
    res = fit_fixed_order(ts, 3, 2)
    assert estimation_error(res.params, truth) < 0.1


def test_forecast_rmse_references():
    truth = ArmaParams([0.6], [])
    y = simulate(truth, 300, seed=1).values
    # one-step error of the true model is the innovation itself
    r = forecast_rmse(truth, truth, y, horizon=1, replicates=4000, seed=3)
    assert r == pytest.approx(1.0, abs=0.05)
    # a zero model forecasts zero, so its error is the RMS of the continuation
    rz = forecast_rmse(truth, ArmaParams.zeros(1, 0), y, horizon=50, replicates=400, seed=3)
    assert rz > r
    with pytest.raises(ValueError):
        forecast_rmse(truth, [truth, truth], [y], horizon=3)


def test_forecast_rmse_lists_and_seed():
    truth = ArmaParams([0.6], [0.2])
    ys = [simulate(truth, 200, seed=s).values for s in range(3)]
    a = forecast_rmse(truth, [truth] * 3, ys, horizon=5, seed=9)
    assert a == forecast_rmse(truth, truth, ys, horizon=5, seed=9)


def _records():
    recs = []
    for rep in range(2):
        for l0, err in [(1.0, 0.2 + rep), (2.0, 0.1 + rep)]:
            recs.append({"p_star": 1, "q_star": 0, "rep": rep, "lambda0": l0, "lambda": l0,
                         "order_p": 1, "order_q": 0, "error": err, "rmse": 1.0,
                         "converged": True, "iterations": 3, "selected": l0 == 2.0,
                         "status": "ok"})
    return recs


def test_bench_report_aggregates_and_roundtrip():
    rep = BenchReport(_records(), meta={"seed": 0})
    cell = {a["lambda0"]: a for a in rep.aggregates}
    assert cell[1.0]["mean_error"] == pytest.approx(0.7)
    assert cell[2.0]["n_true_order"] == 2 and cell[2.0]["n_selected"] == 2
    assert rep.best_lambda0() == {(1, 0): 2.0}
    back = BenchReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert back.aggregates == back.recompute()
    lines = rep.to_csv().splitlines()
    assert len(lines) == 5 and lines[0].startswith("p_star,q_star,rep")
    assert "0.700" in rep.summary()


def test_run_table1_small_is_deterministic():
    kw = dict(T=300, lambda0_grid=(1.0, 3.0), seed=4, p_cap=3, q_cap=3, horizon=5)
    a = run_table1([(1, 1)], 2, **kw)
    b = run_table1([(1, 1)], 2, **kw)
    assert a.to_json() == b.to_json()
    assert len(a.records) == 4
    assert sum(r["selected"] for r in a.records) == 2
    assert json.loads(a.to_json())["meta"]["T"] == 300
    with pytest.raises(ValueError):
        run_table1([(4, 0)], 1, p_cap=3, q_cap=3, T=100)


def test_run_table1_jobs_invariant():
    kw = dict(T=200, lambda0_grid=(2.0,), seed=1, p_cap=2, q_cap=2, horizon=3)
    assert run_table1([(1, 0)], 2, jobs=2, **kw).to_json() == run_table1([(1, 0)], 2, **kw).to_json()
