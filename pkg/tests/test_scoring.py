import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from migrana.countries import load_bundled_table
from migrana.errors import InputError
from migrana.network import NodeRole, classify_roles
from migrana.scoring import (
    FULL,
    REDUCED,
    CoefficientPreset,
    DistributionScorer,
    distribution_score,
    edge_velocity,
    get_preset,
    load_presets,
)

PUBLISHED_EXPORTERS = {"Syria", "Egypt", "Algeria", "Libya", "Malta", "Morocco", "Cyprus", "Romania", "Ukraine"}


def test_intercept_only():
    assert distribution_score([0] * 6, REDUCED).f == pytest.approx(0.0062)


def test_single_factor():
    assert distribution_score({3: 1, 4: 0, 6: 0}, REDUCED).f == pytest.approx(0.9998, abs=1e-12)


def test_half_vector():
    # 0.0062 + 0.5 * (0.9936 - 0.0879 - 0.53)
    assert distribution_score({3: 0.5, 4: 0.5, 6: 0.5}, REDUCED).f == pytest.approx(0.19405, abs=1e-12)


def test_missing_factor_is_error():
    with pytest.raises(InputError, match="x6"):
        distribution_score({3: 1, 4: 0}, REDUCED)


def test_preset_contents():
    assert FULL.weights == {1: 0.0698, 2: -0.0586, 3: 1.013, 4: 0.128, 5: -0.0698, 6: -0.6288}
    assert FULL.intercept == 0.0089
    assert REDUCED.weights == {3: 0.9936, 4: -0.0879, 6: -0.53}


def test_preset_index_range():
    with pytest.raises(InputError):
        CoefficientPreset("bad", 0.0, {7: 1.0})


def test_presets_from_yaml(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("mine:\n  intercept: 0.5\n  weights: {1: 2.0}\n")
    extra = load_presets(path)
    assert get_preset("mine", extra).weights == {1: 2.0}
    assert get_preset("reduced", extra) is REDUCED
    with pytest.raises(InputError, match="unknown preset"):
        get_preset("nope")


@pytest.mark.parametrize(
    "ch, diff, v",
    [(1, 1, 1.0), (0, 5, 0.0), (0.09, 0.01, 3.0), (-2, 1, 0.0)],
)
def test_edge_velocity(ch, diff, v):
    assert edge_velocity(ch, diff) == pytest.approx(v)


@pytest.mark.parametrize("diff", [0, -1])
def test_edge_velocity_domain(diff):
    with pytest.raises(InputError):
        edge_velocity(1.0, diff)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 10), st.floats(0.01, 10))
def test_edge_velocity_monotone(ch1, ch2, d1, d2):
    lo, hi = sorted((ch1, ch2))
    assert edge_velocity(lo, d1) <= edge_velocity(hi, d1)
    dlo, dhi = sorted((d1, d2))
    assert edge_velocity(ch1, dhi) <= edge_velocity(ch1, dlo)


unit = st.lists(st.floats(0, 1), min_size=6, max_size=6)


@given(unit, unit, st.floats(-3, 3), st.floats(-3, 3))
def test_score_is_affine(u, v, a, b):
    for preset in (FULL, REDUCED):
        def s0(x):
            return distribution_score(x, preset).f - preset.intercept

        mixed = [a * ui + b * vi for ui, vi in zip(u, v)]
        assert s0(mixed) == pytest.approx(a * s0(u) + b * s0(v), abs=1e-9)


def test_scorer_transform_matches_function():
    table = load_bundled_table()
    scorer = DistributionScorer("full").fit(table.to_array())
    out = scorer.transform(table.to_array())
    assert out.shape == (len(table), 1)
    std = table.to_array() / table.to_array().max(axis=0)
    expected = [distribution_score(row, FULL).f for row in std]
    assert np.allclose(out.ravel(), expected)
    assert scorer.get_params() == {"preset": "full"}


def test_germany_reduced_score_is_negative():
    scores = {s.country: s.f for s in DistributionScorer("reduced").score_table(load_bundled_table())}
    assert scores["Germany"] == pytest.approx(-0.0144, abs=5e-4)


@pytest.mark.xfail(strict=True, reason="the presets do not reproduce the published exporter split on this table")
def test_reduced_ordering_reproduces_exporters():
    scores = DistributionScorer("reduced").score_table(load_bundled_table())
    ordered = [s.country for s in sorted(scores, key=lambda s: s.f)]
    k = len(PUBLISHED_EXPORTERS)
    assert set(ordered[:k]) == PUBLISHED_EXPORTERS
    roles = classify_roles(scores)
    assert {c for c, r in roles.items() if r is NodeRole.EXPORTER} == PUBLISHED_EXPORTERS
