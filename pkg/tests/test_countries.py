import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from migrana.countries import (
    CountryRecord,
    CountryTable,
    MaxScaler,
    load_country_table,
    load_bundled_table,
    standardize,
    validate_table,
)
from migrana.errors import DuplicateError, InputError, ParseError

HEADER = "name,x1,x2,x3,x4,x5,x6\n"


def _table(text):
    return load_country_table(io.StringIO(HEADER + text))


def test_bundled_table_germany_row():
    de = load_bundled_table().get("Germany")
    assert de.x1 == 3.950017117
    assert de.x3 == 455440
    assert de.x4 == 4.67
    assert de.x6 == 216973


def test_bundled_table_shape_and_clean():
    table = load_bundled_table()
    assert len(table) == 19
    assert "Switzerland" not in table
    assert validate_table(table).ok
    assert validate_table(table).errors == []


def test_thousands_separator_stripped():
    assert load_bundled_table().get("Bulgaria").x5 == 1596860
    t = _table('A,1,2,3,4,"1,596,860",6\n')
    assert t.get("A").x5 == 1596860


def test_percent_sign_stripped():
    t = _table("A,1,2,3,12.5%,5,6\n")
    assert t.get("A").x4 == 12.5


def test_empty_file_is_error():
    with pytest.raises(InputError, match="no data rows"):
        load_country_table(io.StringIO(""))
    with pytest.raises(InputError, match="no data rows"):
        load_country_table(io.StringIO(HEADER))


def test_tab_delimiter_detected():
    t = load_country_table(io.StringIO(HEADER.replace(",", "\t") + "A\t1\t2\t3\t4\t5\t6\n"))
    assert t.get("A").factors == (1, 2, 3, 4, 5, 6)


def test_malformed_cell_names_row_and_column():
    with pytest.raises(ParseError) as exc:
        _table("A,1,2,3,4,5,6\nB,1,2,abc,4,5,6\n")
    assert exc.value.row == 2
    assert exc.value.column == "x3"


def test_duplicate_name():
    with pytest.raises(DuplicateError):
        _table("Spain,1,2,3,4,5,6\nSpain,1,2,3,4,5,6\n")


def test_missing_cell_error_or_imputation():
    text = "A,1,2,3,4,5,6\nB,3,,3,4,5,6\nC,2,5,3,4,5,6\n"
    with pytest.raises(ParseError, match="missing"):
        _table(text)
    t = load_country_table(io.StringIO(HEADER + text), impute_missing=True)
    assert t.get("B").x2 == 4  # mean of 2 and 5, rounded for a count column
    assert t.warnings and t.warnings[0][:2] == (2, "x2")


def test_row_order_preserved():
    t = _table("Z,1,2,3,4,5,6\nA,1,2,3,4,5,6\n")
    assert t.names == ["Z", "A"]


def test_validate_flags_negative_and_duplicates():
    good = CountryRecord("Spain", 1, 2, 3, 4, 5, 6)
    bad = CountryRecord("X", 1, 2, 3, -1, 5, 6)
    report = validate_table(CountryTable((good, bad)))
    assert (2, "x4", "negative") in report.errors
    dup = validate_table(CountryTable((good, good)))
    assert dup.errors and dup.errors[0][1] == "name"


def test_validate_flags_fractional_count():
    rec = CountryRecord("X", 1, 2.5, 3, 4, 5, 6)
    assert (1, "x2", "not integer-valued") in validate_table(CountryTable((rec,))).errors


def test_column_maxima():
    table = load_bundled_table()
    assert table.column_maxima["x1"] == 4.404477702
    assert table.column_maxima["x6"] == 1587374


def test_standardize_germany_x1():
    std = standardize(load_bundled_table())
    assert std.row("Germany")[0] == pytest.approx(3.950017117 / 4.404477702, rel=1e-12)
    assert std.row("Germany")[0] == pytest.approx(0.89682, abs=5e-6)
    assert std.row("Turkey")[0] == 1.0


def test_standardize_constant_column_and_zero_column():
    t = _table("A,2,1,1,1,1,1\nB,2,3,1,1,1,1\n")
    assert np.all(standardize(t).values[:, 0] == 1.0)
    z = _table("A,0,1,1,1,1,1\nB,0,3,1,1,1,1\n")
    with pytest.raises(InputError, match="x1"):
        standardize(z)


def test_standardized_values_read_only():
    std = standardize(load_bundled_table())
    with pytest.raises(ValueError):
        std.values[0, 0] = 2.0


def test_max_scaler_sklearn_api():
    X = np.array([[1.0, 4.0], [2.0, 2.0]])
    scaler = MaxScaler().fit(X)
    assert np.allclose(scaler.transform(X), [[0.5, 1.0], [1.0, 0.5]])
    assert np.allclose(scaler.inverse_transform(scaler.transform(X)), X)
    assert scaler.get_params() == {}


positive = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 6)),
    elements=st.floats(1e-3, 1e6, allow_nan=False),
)


@given(positive)
def test_standardize_bounds_idempotence_and_order(X):
    Y = MaxScaler().fit_transform(X)
    assert np.all((Y > 0) & (Y <= 1.0))
    assert np.all(Y.max(axis=0) == 1.0)
    assert np.allclose(MaxScaler().fit_transform(Y), Y, rtol=1e-15, atol=0)
    for j in range(X.shape[1]):
        i, k = np.nonzero(X[:, j, None] <= X[None, :, j])
        assert np.all(Y[i, j] <= Y[k, j])
