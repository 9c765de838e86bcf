"""Time-dependent behaviour: control-ability trends, neighbour resource
reallocation and Markov citizen/refugee population evolution."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from migrana.errors import ConvergenceError, InputError
from migrana.regression import DesignMatrix, ols_fit


@dataclass(frozen=True)
class EnvironmentalSeries:
    """Yearly change rates (as fractions) and the ordinal ability-to-control score."""

    years: tuple
    medical_change_rate: tuple[float, ...]
    resource_change_rate: tuple[float, ...]
    control_ability: tuple[float, ...]

    def __post_init__(self):
        lengths = {len(self.years), len(self.medical_change_rate), len(self.resource_change_rate), len(self.control_ability)}
        if len(lengths) != 1:
            raise InputError("environmental series have unequal lengths")
        for name in ("medical_change_rate", "resource_change_rate"):
            values = tuple(float(v) for v in getattr(self, name))
            if any(not 0 <= v <= 1 for v in values):
                raise InputError(f"{name} must lie in [0, 1]")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "years", tuple(self.years))
        object.__setattr__(self, "control_ability", tuple(float(v) for v in self.control_ability))

    @classmethod
    def from_mapping(cls, data) -> "EnvironmentalSeries":
        try:
            return cls(
                tuple(data["years"]),
                tuple(data["medical_change_rate"]),
                tuple(data["resource_change_rate"]),
                tuple(data["control_ability"]),
            )
        except KeyError as exc:
            raise InputError(f"environmental series lacks {exc}") from None


# Spain, 2010-2014
SPAIN_SERIES = EnvironmentalSeries(
    years=(2010, 2011, 2012, 2013, 2014),
    medical_change_rate=(0.12, 0.14, 0.18, 0.21, 0.26),
    resource_change_rate=(0.11, 0.16, 0.17, 0.24, 0.25),
    control_ability=(9, 7, 8, 3, 1),
)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float


def fit_control_ability(series: EnvironmentalSeries, factor: str = "medical") -> LinearFit:
    """Straight-line fit of control ability against one environmental rate."""
    if factor not in ("medical", "resource"):
        raise InputError(f"factor must be 'medical' or 'resource', got {factor!r}")
    x = series.medical_change_rate if factor == "medical" else series.resource_change_rate
    if len(x) < 3:
        raise InputError("need at least 3 points for a control-ability fit")
    model = ols_fit(DesignMatrix.from_predictors(x, series.control_ability, (factor,)))
    return LinearFit(slope=float(model.coefficients[1]), intercept=float(model.coefficients[0]))


@dataclass(frozen=True)
class Neighbor:
    country: str
    refugee_change_rate: float
    env_change_rates: tuple[float, ...]

    @property
    def surplus(self) -> float:
        return max(0.0, float(np.mean(self.env_change_rates)) - self.refugee_change_rate)


def resource_gap(refugee_change_rate: float, env_change_rates: Sequence[float]) -> float:
    """How far refugee growth outpaces the mean environmental growth (positive = shortage)."""
    return refugee_change_rate - float(np.mean(env_change_rates))


def reallocation_shares(neighbors: Sequence[Neighbor]) -> dict[str, float]:
    """Share of the supply transfer each neighbour provides, proportional to its surplus."""
    if not neighbors:
        raise InputError("need at least one neighbour")
    surplus = {n.country: n.surplus for n in neighbors}
    total = sum(surplus.values())
    if total <= 0:
        raise InputError("no neighbour has a resource surplus to donate")
    return {c: s / total for c, s in surplus.items()}


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic matrix: column j holds the moves out of state j."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputError("transition matrix must be square")
        if np.any(a < 0) or np.any(a > 1):
            raise InputError("transition probabilities must lie in [0, 1]")
        if not np.allclose(a.sum(axis=0), 1.0, atol=1e-12, rtol=0):
            raise InputError("transition matrix columns must sum to 1")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PopulationState:
    fractions: tuple[float, ...]

    def __post_init__(self):
        fr = tuple(float(v) for v in self.fractions)
        if any(v < 0 for v in fr) or abs(sum(fr) - 1.0) > 1e-12:
            raise InputError(f"population fractions must be non-negative and sum to 1, got {fr}")
        object.__setattr__(self, "fractions", fr)

    @property
    def x_a(self) -> float:
        return self.fractions[0]

    @property
    def x_b(self) -> float:
        return self.fractions[1]

    @classmethod
    def of(cls, *fractions) -> "PopulationState":
        return cls(tuple(fractions))


def _step(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = a @ x
    # column-stochastic steps conserve mass; renormalize away rounding drift
    return np.clip(y, 0.0, None) / y.sum()


def evolve_population(a: TransitionMatrix, x0: PopulationState, steps: int) -> list[PopulationState]:
    if steps < 0:
        raise InputError("steps must be non-negative")
    x = np.array(x0.fractions)
    if x.shape[0] != a.n_states:
        raise InputError("state size does not match the transition matrix")
    trajectory = [x0]
    for _ in range(steps):
        x = _step(a.matrix, x)
        trajectory.append(PopulationState(tuple(x)))
    return trajectory


def power_iterate(
    a: TransitionMatrix, x0: PopulationState | None = None, tol: float = 1e-10, max_iter: int = 10**6
) -> tuple[PopulationState, int]:
    """Iterate ``x <- A x`` until ``max|A x - x| < tol``; return the state and step count.

    Raises :class:`ConvergenceError` after ``max_iter`` steps, or as soon as
    the iterate repeats exactly with period 2.
    """
    x = np.zeros(a.n_states)
    if x0 is None:
        x[0] = 1.0
    else:
        x = np.array(x0.fractions, dtype=float)
    prev = None
    for k in range(max_iter + 1):
        y = _step(a.matrix, x)
        if np.max(np.abs(y - x)) < tol:
            return PopulationState(tuple(x)), k
        if prev is not None and np.array_equal(y, prev):
            # the map is deterministic, so an exact 2-cycle repeats forever
            raise ConvergenceError(f"power iteration oscillates with period 2 (after {k} iterations)")
        prev, x = x, y
    raise ConvergenceError(f"power iteration did not converge within {max_iter} iterations")


def steady_state(a: TransitionMatrix, tol: float = 1e-10, x0: PopulationState | None = None) -> PopulationState:
    """Stationary population split reached by power iteration."""
    return power_iterate(a, x0, tol)[0]
