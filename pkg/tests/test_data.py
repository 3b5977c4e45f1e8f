import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devvoi.data import (
    ColumnSpec,
    DataError,
    Dataset,
    decode_levels,
    design_width,
    empirical_prevalence,
    encode,
    load_csv,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_three_row_outcome(tmp_path):
    path = write(tmp_path, "age,dead\n50,1\n60,0\n70,1\n")
    d = load_csv(path, [ColumnSpec("age"), ColumnSpec("dead", "binary", "outcome")])
    np.testing.assert_array_equal(d.y, [1, 0, 1])
    np.testing.assert_array_equal(d.x[:, 0], 1.0)
    assert d.column_names == ("intercept", "age")


def test_milocc_coding_reference_first_level(tmp_path):
    rows = ["milocc,dead"] + [f"{lv},{i % 2}" for i, lv in enumerate("3456345634")]
    path = write(tmp_path, "\n".join(rows) + "\n")
    schema = [ColumnSpec("milocc", "categorical", levels=("3", "4", "5", "6")),
              ColumnSpec("dead", "binary", "outcome")]
    d = load_csv(path, schema)
    assert d.p == 4
    assert d.column_names[1:] == ("milocc[4]", "milocc[5]", "milocc[6]")
    # rows coded "3" have all dummies off
    assert np.all(d.x[0, 1:] == 0)
    np.testing.assert_array_equal(d.x[1, 1:], [1, 0, 0])
    assert decode_levels(d, "milocc") == list("3456345634")


def test_missing_cell_names_location(tmp_path):
    path = write(tmp_path, "age,sex,dead\n50,1,1\n60,,0\n70,0,1\n80,1,0\n")
    schema = [ColumnSpec("age"), ColumnSpec("sex", "binary"), ColumnSpec("dead", "binary", "outcome")]
    with pytest.raises(DataError, match=r"line 3, column 'sex'"):
        load_csv(path, schema)


def test_unknown_level_rejected(tmp_path):
    path = write(tmp_path, "k,dead\na,1\nb,0\nz,1\na,0\n")
    schema = [ColumnSpec("k", "categorical", levels=("a", "b")), ColumnSpec("dead", "binary", "outcome")]
    with pytest.raises(DataError, match="unknown level 'z'"):
        load_csv(path, schema)


def test_outcome_not_binary(tmp_path):
    path = write(tmp_path, "age,dead\n1,1\n2,0\n3,2\n")
    with pytest.raises(DataError, match="outcome not binary"):
        load_csv(path, [ColumnSpec("age"), ColumnSpec("dead", "binary", "outcome")])


def test_outcome_single_class(tmp_path):
    path = write(tmp_path, "age,dead\n1,1\n2,1\n3,1\n")
    with pytest.raises(DataError, match="both classes"):
        load_csv(path, [ColumnSpec("age"), ColumnSpec("dead", "binary", "outcome")])


def test_too_few_rows_after_encoding(tmp_path):
    path = write(tmp_path, "k,dead\na,1\nb,0\nc,1\n")
    schema = [ColumnSpec("k", "categorical", levels=("a", "b", "c")), ColumnSpec("dead", "binary", "outcome")]
    with pytest.raises(DataError, match="more rows than design columns"):
        load_csv(path, schema)


def test_quoted_fields_and_custom_outcome_labels(tmp_path):
    path = write(tmp_path, 'age,"status"\n"50",alive\n60,dead\n70,"dead"\n')
    d = load_csv(path, [ColumnSpec("age"), ColumnSpec("status", "binary", "outcome", ("alive", "dead"))])
    np.testing.assert_array_equal(d.y, [0, 1, 1])


def test_missing_file():
    with pytest.raises(DataError, match="not found"):
        load_csv("/nonexistent/x.csv", [ColumnSpec("y", "binary", "outcome")])


def test_schema_invariants():
    with pytest.raises(DataError):
        ColumnSpec("k", "categorical", levels=())
    with pytest.raises(DataError):
        ColumnSpec("k", "categorical", levels=("a", "a"))
    with pytest.raises(DataError, match="exactly one outcome"):
        encode([{"a": "1"}], [ColumnSpec("a")])


def test_design_width():
    schema = [ColumnSpec("a"), ColumnSpec("b", "binary"),
              ColumnSpec("c", "categorical", levels=("x", "y", "z")),
              ColumnSpec("o", "binary", "outcome")]
    assert design_width(schema) == 1 + 1 + 1 + 2


def test_prevalence_examples():
    assert empirical_prevalence([1, 0, 1], np.ones(3)) == pytest.approx(2 / 3, abs=1e-15)
    assert empirical_prevalence([0, 0], np.ones(2)) == 0.0
    assert empirical_prevalence([1, 0], [0.8, 0.2]) == pytest.approx(0.8, abs=1e-15)
    with pytest.raises(DataError):
        empirical_prevalence([1, 0], [1.0])


def test_dataset_immutable(six_rows):
    with pytest.raises(ValueError):
        six_rows.x[0, 0] = 5.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=4, max_size=40))
def test_uniform_prevalence_is_mean(ys):
    y = np.array(ys, dtype=float)
    assert abs(empirical_prevalence(y, np.ones(len(y))) - y.mean()) <= 1e-15


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["lo", "mid", "hi"]), min_size=8, max_size=30))
def test_categorical_round_trip(labels):
    rows = [{"k": lv, "o": str(i % 2)} for i, lv in enumerate(labels)]
    schema = [ColumnSpec("k", "categorical", levels=("lo", "mid", "hi")), ColumnSpec("o", "binary", "outcome")]
    d = encode(rows, schema)
    assert decode_levels(d, "k") == labels
    assert d.p == design_width(schema)


def test_dataset_rejects_bad_outcome():
    with pytest.raises(DataError):
        Dataset(np.ones((4, 2)), [0, 1, 2, 0])
