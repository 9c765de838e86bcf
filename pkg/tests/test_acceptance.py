"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines as
they happen; they are also repeated in the terminal summary.
"""

import time
from importlib import resources

import numpy as np
import pytest
from builders import check_plan_invariants, network_from_instance
from oracles import brute_assignment, enumerate_max_flows, ols_by_definition, random_flow_instance

from migrana.assignment import reduce_matrix, solve_assignment
from migrana.countries import load_bundled_table
from migrana.dynamics import SPAIN_SERIES, PopulationState, TransitionMatrix, power_iterate
from migrana.flow import ResidualNetwork, min_cost_max_flow, solve_min_cost_flow
from migrana.network import NodeRole, acceptance_capacity, classify_roles, bundled_scores
from migrana.perturbation import ScenarioEvent, apply_event
from migrana.pipeline import PipelineConfig, run_pipeline
from migrana.regression import DesignMatrix, diagnostics, ols_fit, stepwise_select

PUBLISHED_CAPACITY = {
    "Germany": 723482, "Turkey": 810109, "Italy": 50173, "UK": 77108, "France": 60682,
    "Greece": 297, "Bulgaria": 1138, "Poland": 281, "Spain": 3,
}
PUBLISHED_EXPORTERS = {"Syria", "Egypt", "Algeria", "Libya", "Malta", "Morocco", "Cyprus", "Romania", "Ukraine"}


def _elapsed_below(start, limit):
    elapsed = time.perf_counter() - start
    assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="Poland: the printed score 0.018 gives 289, not 281 (2.8% off)")
def test_criterion_1_capacity_reproduction(criterion):
    def body():
        start = time.perf_counter()
        table = load_bundled_table()
        scores = {s.country: s.f for s in bundled_scores()}
        off = {}
        for country, published in PUBLISHED_CAPACITY.items():
            got = acceptance_capacity(table.get(country).x6, scores[country])
            rel = abs(got - published) / published
            if rel > 0.005:
                off[country] = (got, published, round(rel, 4))
        _elapsed_below(start, 1.0)
        assert not off, f"outside 0.5%: {off}"

    criterion("1 capacity reproduction", body)


def test_criterion_2_control_regressions(criterion):
    def body():
        start = time.perf_counter()
        y = SPAIN_SERIES.control_ability
        fits = []
        for x in (SPAIN_SERIES.medical_change_rate, SPAIN_SERIES.resource_change_rate):
            b = ols_fit(DesignMatrix.from_predictors(x, y)).coefficients
            fits.append((round(b[1], 2), round(b[0], 2)))
        assert fits == [(-56.57, 15.90), (-55.98, 16.01)]
        _elapsed_below(start, 1.0)

    criterion("2 control-ability regressions", body)


def test_criterion_3_markov_steady_state(criterion):
    def body():
        a = TransitionMatrix([[0.95, 0.01], [0.05, 0.99]])
        rng = np.random.default_rng(2016)
        for _ in range(10):
            start = PopulationState(tuple(rng.dirichlet([1.0, 1.0])))
            x, iters = power_iterate(a, start, tol=1e-12)
            assert iters <= 2000
            assert np.max(np.abs(np.array(x.fractions) - [1 / 6, 5 / 6])) < 1e-9

    criterion("3 Markov steady state", body)


def test_criterion_4_hungarian(criterion):
    def body():
        start = time.perf_counter()
        c = [[1, 4, 2], [3, 2, 2], [1, 1, 5]]
        assert reduce_matrix(c).tolist() == [[0, 3, 1], [1, 0, 0], [0, 0, 4]]
        assert solve_assignment(c, "min").total == brute_assignment(c)[0] == 4
        assert solve_assignment(c, "max").total == brute_assignment(c, True)[0] == 12
        rng = np.random.default_rng(4)
        for k in range(500):
            n = int(rng.integers(1, 8))
            m = rng.integers(0, 10, size=(n, n)).astype(float)
            maximize = bool(k % 2)
            got = solve_assignment(m, "max" if maximize else "min")
            total, perm = brute_assignment(m, maximize)
            assert got.total == pytest.approx(total, abs=1e-9), k
            assert got.permutation == perm, k
        _elapsed_below(start, 10.0)

    criterion("4 Hungarian assignment", body)


def test_criterion_5_min_cost_flow(criterion):
    def body():
        start = time.perf_counter()
        rng = np.random.default_rng(5)
        for k in range(500):
            n, arcs = random_flow_instance(rng)
            net = ResidualNetwork(range(n))
            ids = [net.add_arc(*a) for a in arcs]
            result = min_cost_max_flow(net, 0, n - 1)
            assert (result.total_flow, result.total_cost) == enumerate_max_flows(n, arcs, 0, n - 1), k
            check_plan_invariants(net, ids, result, 0, n - 1)
        _elapsed_below(start, 60.0)

    criterion("5 min-cost max-flow", body)


def test_criterion_6_classification(criterion):
    def body():
        roles = classify_roles(bundled_scores())
        assert {c for c, r in roles.items() if r is NodeRole.EXPORTER} == PUBLISHED_EXPORTERS

    criterion("6 sign classification", body)


def test_criterion_7_regression_properties(criterion):
    def body():
        rng = np.random.default_rng(7)
        for _ in range(20):
            n, k = int(rng.integers(10, 40)), int(rng.integers(1, 5))
            X = rng.normal(size=(n, k)) * rng.uniform(0.5, 20, size=k)
            y = X @ rng.normal(size=k) + rng.normal(size=n)
            d = DesignMatrix.from_predictors(X, y)
            m = ols_fit(d)
            resid = y - m.predict(d)
            assert np.max(np.abs(d.values.T @ resid)) < 1e-8
            diag = diagnostics(m, d)
            ref = ols_by_definition(X, y)
            assert diag.f_statistic == pytest.approx(ref["F"], rel=1e-8)
            assert np.allclose(diag.t_statistics, ref["t"], rtol=1e-8)
        for seed in range(5):
            r = np.random.default_rng(100 + seed)
            X = r.normal(size=(40, 4))
            planted = sorted(r.choice(4, size=2, replace=False).tolist())
            # noise orthogonal to every column, so the unplanted ones carry no signal
            q, _ = np.linalg.qr(np.column_stack([np.ones(40), X]))
            noise = r.normal(size=40)
            noise -= q @ (q.T @ noise)
            y = 3 * X[:, planted[0]] - 2 * X[:, planted[1]] + 0.1 * noise
            assert list(stepwise_select(DesignMatrix.from_predictors(X, y)).included) == planted

    criterion("7 regression properties", body)


def test_criterion_8_determinism(criterion, tmp_path):
    def body():
        data = resources.files("migrana.data")
        kwargs = dict(scenario=str(data / "three_stage_timeline.yaml"), dynamics=str(data / "spain_dynamics.yaml"))
        first = run_pipeline(PipelineConfig(out=str(tmp_path / "a"), **kwargs))
        run_pipeline(PipelineConfig(out=str(tmp_path / "b"), **kwargs))
        names = [n for n in first.files if n.endswith(".csv")]
        assert len(names) >= 6
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    criterion("8 pipeline determinism", body)


def test_criterion_9_perturbation_monotonicity(criterion):
    def body():
        rng = np.random.default_rng(9)
        for _ in range(100):
            n, arcs = random_flow_instance(rng)
            k = int(rng.integers(len(arcs)))
            u, v, c, w = arcs[k]
            bump = int(rng.integers(1, 10))
            raised = arcs[:k] + [(u, v, c, w + bump)] + arcs[k + 1 :]
            base = network_from_instance(n, arcs)
            event = ScenarioEvent("raise", [(f"n{u}", f"n{v}", float(w + bump))])
            before = solve_min_cost_flow(base)
            after = solve_min_cost_flow(apply_event(base, event))
            assert (before.total_flow, before.total_cost) == enumerate_max_flows(n, arcs, 0, n - 1)
            assert (after.total_flow, after.total_cost) == enumerate_max_flows(n, raised, 0, n - 1)
            assert after.total_cost >= before.total_cost

    criterion("9 perturbation monotonicity", body)
