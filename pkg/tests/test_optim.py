import numpy as np
import pytest

from msglon.bench import (
    BenchProtocol,
    BudgetedObjective,
    InstancePerformance,
    is_success,
    measure,
    summarize,
)
from msglon.cmaes import CmaParams, run_cmaes
from msglon.de import POP_PER_DIM, run_de
from msglon.errors import ValidationError
from msglon.landscape import MsgInstance, evaluate_batch, random_instance


def _easy_instance():
    return MsgInstance(dim=2, centers=np.array([[0.5, 0.5]]),
                       weights=np.array([1.0]), sigmas=np.array([0.4]))


# ---------------------------------------------------------------------------
# budget accounting


def test_budgeted_objective_counts_and_raises(small_random):
    obj = BudgetedObjective(small_random, budget=10)
    pts = np.random.default_rng(0).random((6, 2))
    values = obj(pts)
    assert obj.evals == 6 and obj.remaining == 4 and not obj.exhausted
    assert obj.best_f == values.max()
    want, _ = evaluate_batch(small_random, pts)
    np.testing.assert_array_equal(values, want)
    with pytest.raises(ValidationError):
        obj(np.random.default_rng(1).random((5, 2)))
    obj(np.random.default_rng(2).random((4, 2)))
    assert obj.exhausted and obj.remaining == 0


def test_best_tracking_keeps_argmax(small_random):
    obj = BudgetedObjective(small_random, budget=100)
    pts = np.random.default_rng(3).random((50, 2))
    obj(pts)
    values, _ = evaluate_batch(small_random, pts)
    top = int(np.argmax(values))
    assert obj.best_f == values[top]
    np.testing.assert_array_equal(obj.best_x, pts[top])


def test_protocol_validation():
    with pytest.raises(ValidationError):
        BenchProtocol(trials=0)
    with pytest.raises(ValidationError):
        BenchProtocol(success_tol=0.0)
    with pytest.raises(ValidationError):
        BenchProtocol(success_metric="manhattan")
    assert BenchProtocol().budget(2) == 2000


def test_is_success_metrics():
    inst = _easy_instance()
    euclid = BenchProtocol(success_tol=1e-2)
    cheby = BenchProtocol(success_tol=1e-2, success_metric="max")
    near = np.array([0.5 + 0.0099, 0.5])
    corner = np.array([0.5 + 0.0099, 0.5 + 0.0099])
    assert is_success(euclid, inst, near)
    assert is_success(cheby, inst, near)
    assert not is_success(euclid, inst, corner)  # norm = 0.014
    assert is_success(cheby, inst, corner)
    assert not is_success(euclid, inst, None)


# ---------------------------------------------------------------------------
# DE


def test_de_budget_exact_with_partial_generation(small_random):
    # budget 210 = init 20 + 9 full generations + a 10-point partial one
    protocol = BenchProtocol(trials=3, budget_per_dim=105)
    for rec in run_de(small_random, protocol, seed=1):
        assert rec.evals_used <= protocol.budget(2)
        if not rec.converged:
            assert rec.evals_used == 210
        assert 0.0 <= rec.best_f <= 1.0
        assert np.all(rec.best_x >= 0.0) and np.all(rec.best_x <= 1.0)


def test_de_deterministic(small_random):
    protocol = BenchProtocol(trials=3, budget_per_dim=60)
    a = run_de(small_random, protocol, seed=7)
    b = run_de(small_random, protocol, seed=7)
    for x, y in zip(a, b):
        assert x.evals_used == y.evals_used and x.best_f == y.best_f
        np.testing.assert_array_equal(x.best_x, y.best_x)
    c = run_de(small_random, protocol, seed=8)
    assert any(x.best_f != y.best_f for x, y in zip(a, c))


def test_de_converges_with_loose_tolerances(small_random):
    protocol = BenchProtocol(trials=2, budget_per_dim=500, conv_tol_x=2.0, conv_tol_f=2.0)
    for rec in run_de(small_random, protocol, seed=0):
        assert rec.converged
        assert rec.evals_used == POP_PER_DIM * 2  # stops right after initialization


def test_de_finds_easy_peak():
    protocol = BenchProtocol(trials=5, budget_per_dim=1000)
    records = run_de(_easy_instance(), protocol, seed=3)
    assert all(rec.success for rec in records)
    assert all(rec.repairs == 0 for rec in records)


# ---------------------------------------------------------------------------
# CMA-ES


def test_cma_params_for_dim():
    p2 = CmaParams.for_dim(2)
    assert p2.lam == 6 and p2.mu == 3
    assert p2.weights.shape == (3,)
    assert p2.weights.sum() == pytest.approx(1.0)
    assert np.all(np.diff(p2.weights) < 0) and np.all(p2.weights > 0)
    assert p2.chin == pytest.approx(np.sqrt(2) * (1 - 1 / 8 + 1 / 84))
    p5 = CmaParams.for_dim(5)
    assert p5.lam == 8 and p5.mu == 4
    assert 0 < p5.cs < 1 and 0 < p5.cc < 1 and p5.c1 + p5.cmu <= 1


def test_cma_budget_exact(small_random):
    # budget 100 with lam=6: 16 full generations, then a 4-point partial one
    protocol = BenchProtocol(trials=3, budget_per_dim=50)
    for rec in run_cmaes(small_random, protocol, seed=2):
        assert rec.evals_used <= 100
        if not rec.converged:
            assert rec.evals_used == 100


def test_cma_deterministic(small_random):
    protocol = BenchProtocol(trials=3, budget_per_dim=60)
    a = run_cmaes(small_random, protocol, seed=5)
    b = run_cmaes(small_random, protocol, seed=5)
    for x, y in zip(a, b):
        assert x.evals_used == y.evals_used and x.best_f == y.best_f
        assert x.repairs == y.repairs
        np.testing.assert_array_equal(x.best_x, y.best_x)


def test_cma_converges_with_loose_tolerances(small_random):
    protocol = BenchProtocol(trials=2, budget_per_dim=500, conv_tol_x=10.0, conv_tol_f=10.0)
    for rec in run_cmaes(small_random, protocol, seed=0):
        assert rec.converged
        assert rec.evals_used == 6  # one full generation before the check can fire


def test_cma_finds_easy_peak():
    protocol = BenchProtocol(trials=5, budget_per_dim=1000)
    records = run_cmaes(_easy_instance(), protocol, seed=4)
    assert all(rec.success for rec in records)


def test_cma_tight_convergence_stops_early():
    # a single sharp peak collapses the sampling distribution quickly
    inst = MsgInstance(dim=2, centers=np.array([[0.5, 0.5]]),
                       weights=np.array([1.0]), sigmas=np.array([0.1]))
    protocol = BenchProtocol(trials=3, budget_per_dim=2000)
    records = run_cmaes(inst, protocol, seed=1)
    assert any(rec.converged and rec.evals_used < protocol.budget(2) for rec in records)


# ---------------------------------------------------------------------------
# aggregation


def test_summarize_and_measure(small_random):
    protocol = BenchProtocol(trials=5, budget_per_dim=50)
    records = run_de(small_random, protocol, seed=0)
    perf = summarize("de", records)
    assert isinstance(perf, InstancePerformance)
    assert perf.trials == 5
    assert perf.success_rate == sum(r.success for r in records) / 5
    assert perf.conv_time == pytest.approx(np.mean([r.evals_used for r in records]))

    m1 = measure(small_random, "de", protocol, instance_id=3)
    m2 = measure(small_random, "de", protocol, instance_id=3)
    assert m1 == m2
    with pytest.raises(ValidationError):
        measure(small_random, "sgd", protocol)


def test_measure_runs_cmaes_too():
    inst = random_instance(1, 10, seed=2)
    perf = measure(inst, "cmaes", BenchProtocol(trials=3, budget_per_dim=40))
    assert perf.algorithm == "cmaes" and perf.trials == 3
    assert 0.0 <= perf.success_rate <= 1.0
    assert perf.conv_time <= 40
