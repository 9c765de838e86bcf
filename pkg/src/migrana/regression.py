"""Ordinary least squares with F/t diagnostics and stepwise selection.

The functional core (:func:`ols_fit`, :func:`diagnostics`,
:func:`stepwise_select`) works on a :class:`DesignMatrix`; the estimator
wrappers :class:`OLSRegression` and :class:`StepwiseRegression` expose the
same machinery through the scikit-learn ``fit``/``predict`` protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from migrana.errors import InputError, SingularDesignError

# smallest singular value below RANK_RTOL * largest means rank deficient
RANK_RTOL = 1e-10
# residual sums below EXACT_FIT_RTOL * total sum of squares count as zero
EXACT_FIT_RTOL = 1e-20


@dataclass(frozen=True)
class DesignMatrix:
    """Intercept-augmented design: column 0 is all ones, then ``k`` predictors."""

    values: np.ndarray
    response: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        response = np.asarray(self.response, dtype=float).ravel()
        if values.ndim != 2 or values.shape[0] != response.shape[0]:
            raise InputError("design matrix and response disagree in length")
        if not np.all(values[:, 0] == 1.0):
            raise InputError("first design column must be the all-ones intercept")
        if values.shape[0] <= values.shape[1]:
            raise InputError(
                f"need more rows than coefficients: n={values.shape[0]}, k+1={values.shape[1]}"
            )
        names = tuple(self.names) or tuple(f"x{j}" for j in range(1, values.shape[1]))
        if len(names) != values.shape[1] - 1:
            raise InputError("one name per predictor column required")
        values.setflags(write=False)
        response.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_predictors(cls, X, y, names=()) -> "DesignMatrix":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(np.column_stack([np.ones(X.shape[0]), X]), y, tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1] - 1

    def columns(self, included) -> np.ndarray:
        """Intercept plus the given predictor columns (0-based predictor indices)."""
        return self.values[:, [0] + [j + 1 for j in included]]


@dataclass(frozen=True)
class RegressionModel:
    """Fitted coefficients for the intercept and the ``included`` predictors only."""

    coefficients: np.ndarray
    residual_sum_squares: float
    sigma2_hat: float
    included: tuple[int, ...]

    def predict(self, design: DesignMatrix) -> np.ndarray:
        return design.columns(self.included) @ self.coefficients


@dataclass(frozen=True)
class FitDiagnostics:
    f_statistic: float
    f_pvalue: float
    t_statistics: np.ndarray
    t_pvalues: np.ndarray
    r_squared: float
    adjusted_r_squared: float
    df_model: int
    df_resid: int


def _column_label(design: DesignMatrix, col: int) -> str:
    return "intercept" if col == 0 else design.names[col - 1]


def _svd(A: np.ndarray, design: DesignMatrix, included) -> tuple:
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[-1] < RANK_RTOL * s[0]:
        cols = [0] + [j + 1 for j in included]
        null = Vt[-1]
        dependent = [
            _column_label(design, cols[i]) for i in np.flatnonzero(np.abs(null) > 1e-8)
        ]
        raise SingularDesignError(dependent)
    return U, s, Vt


def ols_fit(design: DesignMatrix, included=None) -> RegressionModel:
    """Least squares fit through an SVD of the design columns.

    ``included`` restricts the fit to a subset of predictors (0-based); by
    default every predictor is used.
    """
    included = tuple(range(design.k)) if included is None else tuple(sorted(included))
    A = design.columns(included)
    U, s, Vt = _svd(A, design, included)
    beta = Vt.T @ ((U.T @ design.response) / s)
    resid = design.response - A @ beta
    rss = float(resid @ resid)
    dof = design.n - len(included) - 1
    return RegressionModel(beta, rss, rss / dof, included)


def _total_ss(y: np.ndarray) -> float:
    centered = y - y.mean()
    return float(centered @ centered)


def diagnostics(model: RegressionModel, design: DesignMatrix) -> FitDiagnostics:
    """Overall F test, per-coefficient t tests and R-squared for ``model``."""
    k = len(model.included)
    dof = design.n - k - 1
    if dof <= 0:
        raise InputError(f"no residual degrees of freedom (n={design.n}, k={k})")
    A = design.columns(model.included)
    _, s, Vt = _svd(A, design, model.included)
    rss = model.residual_sum_squares
    tss = _total_ss(design.response)
    ess = tss - rss
    sigma2 = rss / dof
    cov_diag = np.sum((Vt.T / s) ** 2, axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt(sigma2 * cov_diag)
        t = model.coefficients / se
        f = (ess / k) / sigma2 if k else np.nan
    t_p = 2.0 * stats.t.sf(np.abs(t), dof)
    f_p = float(stats.f.sf(f, k, dof)) if k else np.nan

    if tss > 0:
        r2 = max(0.0, min(1.0, 1.0 - rss / tss))
    else:
        r2 = 1.0 if rss <= EXACT_FIT_RTOL else 0.0
    adj = 1.0 - (1.0 - r2) * (design.n - 1) / dof
    return FitDiagnostics(float(f), f_p, t, t_p, r2, adj, k, dof)


def _partial_f_pvalue(rss_small: float, rss_big: float, df_resid: int, scale: float) -> float:
    """p-value for adding one predictor that lowers RSS from rss_small to rss_big."""
    floor = EXACT_FIT_RTOL * max(scale, 1.0)
    gain = rss_small - rss_big
    if rss_big <= floor:
        return 1.0 if gain <= floor else 0.0
    f = max(gain, 0.0) / (rss_big / df_resid)
    return float(stats.f.sf(f, 1, df_resid))


def _try_fit(design: DesignMatrix, included) -> RegressionModel | None:
    try:
        return ols_fit(design, included)
    except SingularDesignError:
        return None


def stepwise_select(
    design: DesignMatrix, enter_p: float = 0.05, exit_p: float = 0.10, max_steps: int | None = None
) -> RegressionModel:
    """Forward selection with backward elimination by partial F tests.

    Each step first admits the excluded predictor with the smallest p-value
    below ``enter_p`` (lower index wins ties), then drops the included
    predictor with the largest p-value at or above ``exit_p``. Candidates
    that would make the design singular are skipped. The procedure stops when
    a step changes nothing or an already visited subset recurs.
    """
    if not 0 < enter_p <= exit_p < 1:
        raise InputError(f"need 0 < enter_p <= exit_p < 1, got {enter_p}, {exit_p}")
    scale = _total_ss(design.response)
    current: tuple[int, ...] = ()
    model = ols_fit(design, current)
    seen = {current}
    max_steps = max_steps or 4 * (design.k + 1) ** 2

    for _ in range(max_steps):
        changed = False
        candidates = []
        for j in range(design.k):
            if j in current or design.n - len(current) - 2 <= 0:
                continue
            bigger = _try_fit(design, current + (j,))
            if bigger is None:
                continue
            p = _partial_f_pvalue(
                model.residual_sum_squares,
                bigger.residual_sum_squares,
                design.n - len(current) - 2,
                scale,
            )
            candidates.append((p, j))
        if candidates:
            p, j = min(candidates)
            if p < enter_p:
                current = tuple(sorted(current + (j,)))
                model = ols_fit(design, current)
                changed = True

        removals = []
        for j in current:
            smaller = ols_fit(design, tuple(i for i in current if i != j))
            p = _partial_f_pvalue(
                smaller.residual_sum_squares,
                model.residual_sum_squares,
                design.n - len(current) - 1,
                scale,
            )
            removals.append((p, -j))
        if removals:
            p, neg_j = max(removals)
            if p >= exit_p:
                current = tuple(i for i in current if i != -neg_j)
                model = ols_fit(design, current)
                changed = True

        if not changed or current in seen:
            break
        seen.add(current)
    return ols_fit(design, current)


class OLSRegression(RegressorMixin, BaseEstimator):
    """Linear least squares estimator with an intercept.

    After ``fit`` the estimator exposes ``intercept_``, ``coef_``,
    ``model_`` (a :class:`RegressionModel`) and ``diagnostics_``.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        design = DesignMatrix.from_predictors(X, y)
        self.model_ = ols_fit(design)
        self.diagnostics_ = diagnostics(self.model_, design)
        self.intercept_ = float(self.model_.coefficients[0])
        self.coef_ = self.model_.coefficients[1:].copy()
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return self.intercept_ + X @ self.coef_


class StepwiseRegression(RegressorMixin, BaseEstimator):
    """Stepwise-selected linear model.

    Parameters
    ----------
    enter_p : float
        A predictor enters when its partial F-test p-value is below this.
    exit_p : float
        An included predictor is dropped when its p-value reaches this.

    Attributes
    ----------
    support_ : ndarray of bool
        Mask of selected predictors.
    coef_ : ndarray
        Coefficients of the selected predictors only, in column order.
    """

    def __init__(self, enter_p=0.05, exit_p=0.10):
        self.enter_p = enter_p
        self.exit_p = exit_p

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        design = DesignMatrix.from_predictors(X, y)
        self.model_ = stepwise_select(design, self.enter_p, self.exit_p)
        self.support_ = np.zeros(X.shape[1], dtype=bool)
        self.support_[list(self.model_.included)] = True
        self.intercept_ = float(self.model_.coefficients[0])
        self.coef_ = self.model_.coefficients[1:].copy()
        self.diagnostics_ = diagnostics(self.model_, design)
        self.n_features_in_ = X.shape[1]
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        return np.flatnonzero(self.support_) if indices else self.support_.copy()

    def predict(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=float)
        return self.intercept_ + X[:, self.support_] @ self.coef_
