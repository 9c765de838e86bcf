"""Distribution scores from coefficient presets, and inter-node flow velocity."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import yaml
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from migrana.countries import FACTORS, CountryTable, MaxScaler
from migrana.errors import InputError


@dataclass(frozen=True)
class CoefficientPreset:
    """Intercept plus weights keyed by 1-based factor index."""

    name: str
    intercept: float
    weights: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        weights = {int(k): float(v) for k, v in dict(self.weights).items()}
        bad = [k for k in weights if not 1 <= k <= len(FACTORS)]
        if bad:
            raise InputError(f"preset {self.name!r}: factor indices {bad} outside 1..{len(FACTORS)}")
        object.__setattr__(self, "weights", dict(sorted(weights.items())))

    def coefficient_vector(self, n_factors: int = len(FACTORS)) -> np.ndarray:
        vec = np.zeros(n_factors)
        for idx, w in self.weights.items():
            if idx > n_factors:
                raise InputError(f"preset {self.name!r} uses factor x{idx}; record has {n_factors}")
            vec[idx - 1] = w
        return vec


FULL = CoefficientPreset(
    "full",
    0.0089,
    {1: 0.0698, 2: -0.0586, 3: 1.013, 4: 0.128, 5: -0.0698, 6: -0.6288},
)
REDUCED = CoefficientPreset("reduced", 0.0062, {3: 0.9936, 4: -0.0879, 6: -0.53})

PRESETS: dict[str, CoefficientPreset] = {p.name: p for p in (FULL, REDUCED)}


def load_presets(path) -> dict[str, CoefficientPreset]:
    """Read presets from YAML: ``name: {intercept: .., weights: {3: .., 4: ..}}``."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise InputError(f"{path}: expected a mapping of preset names")
    presets = {}
    for name, body in raw.items():
        try:
            presets[str(name)] = CoefficientPreset(str(name), float(body["intercept"]), body.get("weights", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: preset {name!r} is malformed ({exc})") from None
    return presets


def get_preset(name: str, extra: Mapping[str, CoefficientPreset] | None = None) -> CoefficientPreset:
    table = {**PRESETS, **(extra or {})}
    try:
        return table[name]
    except KeyError:
        raise InputError(f"unknown preset {name!r}; known: {', '.join(sorted(table))}") from None


@dataclass(frozen=True)
class DistributionScore:
    country: str
    f: float


def distribution_score(record, preset: CoefficientPreset, country: str = "") -> DistributionScore:
    """Score one standardized factor vector.

    ``record`` is a sequence of factor values (position 0 is x1) or a mapping
    from 1-based factor index to value.
    """
    if isinstance(record, Mapping):
        values = {int(k): float(v) for k, v in record.items()}
    else:
        values = {i: float(v) for i, v in enumerate(record, start=1)}
    f = preset.intercept
    for idx, w in preset.weights.items():
        if idx not in values:
            raise InputError(f"preset {preset.name!r} needs factor x{idx}, absent from record")
        f += w * values[idx]
    return DistributionScore(country, f)


def edge_velocity(ch: float, diff: float) -> float:
    """Flow speed along a line: sqrt(ch / diff), zero when the score drops."""
    if not diff > 0:
        raise InputError(f"route difficulty must be positive, got {diff}")
    if ch <= 0:
        return 0.0
    return math.sqrt(ch / diff)


class DistributionScorer(TransformerMixin, BaseEstimator):
    """Max-standardize raw factor columns, then apply a linear preset.

    ``fit`` learns the per-column maxima; ``transform`` returns an ``(n, 1)``
    array of scores so the scorer can sit inside a pipeline.
    """

    def __init__(self, preset="reduced"):
        self.preset = preset

    def _resolved(self) -> CoefficientPreset:
        return self.preset if isinstance(self.preset, CoefficientPreset) else get_preset(self.preset)

    def fit(self, X, y=None):
        self.scaler_ = MaxScaler().fit(X)
        self.n_features_in_ = self.scaler_.n_features_in_
        self.coefficients_ = self._resolved().coefficient_vector(self.n_features_in_)
        self.intercept_ = self._resolved().intercept
        return self

    def transform(self, X):
        check_is_fitted(self, "scaler_")
        X = check_array(X, dtype=float)
        return (self.intercept_ + self.scaler_.transform(X) @ self.coefficients_)[:, None]

    def score_table(self, table: CountryTable) -> list[DistributionScore]:
        f = self.fit(table.to_array()).transform(table.to_array()).ravel()
        return [DistributionScore(name, float(v)) for name, v in zip(table.names, f)]
