import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import ols_by_definition

from migrana.dynamics import SPAIN_SERIES
from migrana.errors import InputError, SingularDesignError
from migrana.regression import (
    DesignMatrix,
    OLSRegression,
    StepwiseRegression,
    diagnostics,
    ols_fit,
    stepwise_select,
)


def design(X, y, names=()):
    return DesignMatrix.from_predictors(X, y, names)


def test_constant_response():
    m = ols_fit(design([1.0, 2.0, 3.0, 5.0], [7.0] * 4))
    assert np.allclose(m.coefficients, [7.0, 0.0], atol=1e-12)


def test_exact_line():
    m = ols_fit(design([1.0, 2.0, 3.0], [3.0, 5.0, 7.0]))
    assert np.allclose(m.coefficients, [1.0, 2.0])
    assert m.residual_sum_squares == pytest.approx(0.0, abs=1e-20)


def test_medical_series_fit():
    m = ols_fit(design(SPAIN_SERIES.medical_change_rate, SPAIN_SERIES.control_ability))
    assert round(m.coefficients[0], 2) == 15.90
    assert round(m.coefficients[1], 2) == -56.57


def test_intercept_column_required():
    with pytest.raises(InputError):
        DesignMatrix(np.array([[2.0, 1.0], [1.0, 2.0], [1.0, 3.0]]), [1, 2, 3])


def test_too_few_rows():
    with pytest.raises(InputError):
        design([[1.0, 2.0], [2.0, 1.0], [3.0, 3.0]], [1.0, 2.0, 3.0])


def test_rank_deficient_names_columns():
    rng = np.random.default_rng(0)
    a = rng.normal(size=10)
    X = np.column_stack([a, rng.normal(size=10), 2 * a])
    with pytest.raises(SingularDesignError) as exc:
        ols_fit(design(X, rng.normal(size=10), ("x1", "x2", "x3")))
    assert set(exc.value.columns) == {"x1", "x3"}


def test_perfect_fit_r_squared():
    X = np.arange(8.0)
    d = design(X, 3 * X - 1)
    assert diagnostics(ols_fit(d), d).r_squared == 1.0


def test_orthogonal_predictor_has_zero_t():
    rng = np.random.default_rng(1)
    n = 20
    x1 = rng.normal(size=n)
    y = 2 * x1 + rng.normal(size=n)
    # second predictor orthogonal to the intercept, x1 and y
    basis = np.column_stack([np.ones(n), x1, y])
    q, _ = np.linalg.qr(basis)
    z = rng.normal(size=n)
    z -= q @ (q.T @ z)
    d = design(np.column_stack([x1, z]), y)
    diag = diagnostics(ols_fit(d), d)
    assert diag.t_statistics[2] == pytest.approx(0.0, abs=1e-9)


def test_diagnostics_match_definition_oracle():
    rng = np.random.default_rng(20)
    X = rng.normal(size=(20, 3))
    y = X @ [1.5, -2.0, 0.3] + rng.normal(size=20)
    d = design(X, y)
    m = ols_fit(d)
    diag = diagnostics(m, d)
    ref = ols_by_definition(X, y)
    assert diag.f_statistic == pytest.approx(ref["F"], rel=1e-8)
    assert np.allclose(diag.t_statistics, ref["t"], rtol=1e-8)
    assert np.allclose(diag.t_pvalues, ref["t_p"], rtol=1e-8, atol=1e-14)
    assert diag.f_pvalue == pytest.approx(ref["F_p"], rel=1e-8, abs=1e-14)
    assert diag.r_squared == pytest.approx(ref["r2"], rel=1e-10)
    assert diag.r_squared >= diag.adjusted_r_squared
    assert (diag.df_model, diag.df_resid) == (3, 16)


def test_stepwise_recovers_planted_predictor():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 3))
    q, _ = np.linalg.qr(np.column_stack([np.ones(30), X]))
    X = q[:, 1:] * 5  # orthogonal predictors
    y = 3 * X[:, 0] + 0.01 * rng.normal(size=30)
    model = stepwise_select(design(X, y))
    assert model.included == (0,)


def test_stepwise_noise_selects_nothing():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 4))
    y = rng.permutation(rng.normal(size=40))
    assert stepwise_select(design(X, y)).included == ()


def test_stepwise_single_predictor_equals_ols():
    rng = np.random.default_rng(7)
    x = rng.normal(size=15)
    d = design(x, 4 * x + rng.normal(scale=0.1, size=15))
    assert np.array_equal(stepwise_select(d).coefficients, ols_fit(d).coefficients)


def test_stepwise_thresholds_validated():
    d = design(np.arange(6.0), np.arange(6.0) ** 2)
    with pytest.raises(InputError):
        stepwise_select(d, enter_p=0.2, exit_p=0.1)


def test_stepwise_skips_duplicate_column():
    rng = np.random.default_rng(11)
    x = rng.normal(size=25)
    X = np.column_stack([x, x, rng.normal(size=25)])
    model = stepwise_select(design(X, 2 * x + rng.normal(scale=0.1, size=25)))
    assert 0 in model.included and 1 not in model.included


def test_sklearn_estimators():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    y = 1 + 2 * X[:, 1] + rng.normal(scale=0.01, size=30)
    ols = OLSRegression().fit(X, y)
    assert ols.coef_[1] == pytest.approx(2.0, abs=0.05)
    assert ols.score(X, y) > 0.99
    sw = StepwiseRegression(enter_p=0.01, exit_p=0.05).fit(X, y)
    assert sw.get_params() == {"enter_p": 0.01, "exit_p": 0.05}
    assert list(sw.get_support(indices=True)) == [1]
    assert np.allclose(sw.predict(X), ols.predict(X), atol=0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(8, 30), st.integers(1, 4))
def test_residuals_orthogonal_and_permutation_invariant(seed, n, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k)) * rng.uniform(0.1, 100, size=k)
    y = rng.normal(size=n) * 10
    d = design(X, y)
    m = ols_fit(d)
    resid = y - m.predict(d)
    assert np.max(np.abs(d.values.T @ resid)) < 1e-8 * max(1.0, np.abs(d.values).max() * np.abs(y).max())
    perm = rng.permutation(n)
    mp = ols_fit(design(X[perm], y[perm]))
    assert np.allclose(mp.coefficients, m.coefficients, rtol=1e-9, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stepwise_refit_is_bit_identical(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 4))
    y = X[:, 0] - 0.5 * X[:, 2] + rng.normal(size=25)
    d = design(X, y)
    m = stepwise_select(d)
    assert set(m.included) <= set(range(4))
    assert np.array_equal(ols_fit(d, m.included).coefficients, m.coefficients)
