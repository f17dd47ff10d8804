import numpy as np
import pytest

from sparsechoice import store
from sparsechoice.config import GeneratorConfig
from sparsechoice.errors import StoreError
from sparsechoice.exprlib import parse_expr
from sparsechoice.featlib import LibraryEntry, LibrarySpec, build_library
from sparsechoice.sigstats import StatRow, StatTable, stats_frame
from sparsechoice.synthgen import draw_and_aggregate, gen_complex


def test_dataset_round_trip_is_exact(tmp_path):
    data = gen_complex(GeneratorConfig(scenario="complex_fractional", rows=15, seed=12))
    observed = draw_and_aggregate(data.true_probs, 1000, seed=12)
    path = store.write_dataset(tmp_path / "dataset.csv", data.covariates, observed)

    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join([f"x{i}" for i in range(40)] + ["p0", "p1"])
    assert b"\r\n" not in path.read_bytes()

    covariates, shares = store.read_dataset(path, replicates=1000)
    np.testing.assert_array_equal(covariates.values, data.covariates.values)
    np.testing.assert_array_equal(shares.shares, observed.shares)


def test_dataset_header_is_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,x0,p0\n0.1,0.2,1.0\n", encoding="utf-8")
    with pytest.raises(StoreError, match="expected header"):
        store.read_dataset(path)


def test_missing_file(tmp_path):
    with pytest.raises(StoreError, match="file not found"):
        store.read_dataset(tmp_path / "nope.csv")


def test_library_round_trip_keeps_labels(tmp_path):
    X = np.array([[0.25, -1.5], [3.0, 1e-300]])
    spec = LibrarySpec(
        (
            LibraryEntry(parse_expr("x"), (0, 1)),
            LibraryEntry(parse_expr("x * x1"), (0,)),
            LibraryEntry(parse_expr("x"), (0,)),
        )
    )
    library = build_library(spec, X)
    path = store.write_library(tmp_path / "library.csv", library)
    labels, values = store.read_library(path)
    assert labels == ["x0", "x1", "x0 * x1", "x0"]
    np.testing.assert_array_equal(values, library.raw_values)


def test_coefficients_round_trip(tmp_path):
    big_seed = 2**64 - 1
    records = [
        (0, big_seed, 0, "f1", 0.1),
        (0, big_seed, 0, "f2", -1.0000000000000002),
        (1, 7, 0, "f1", 0.0),
        (1, 7, 0, "f2", 5e-324),
    ]
    path = store.write_coefficient_records(tmp_path / "coefficients.csv", records)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "run,seed,alternative,base_function,coefficient"
    frame = store.read_coefficients(path)
    assert [int(s) for s in frame["seed"]] == [big_seed, big_seed, 7, 7]
    assert list(frame["coefficient"]) == [r[4] for r in records]


def test_stats_round_trip(tmp_path):
    rows = (
        StatRow(0, "f1", "x0", 0, 0.125, 0.5, 1.0, 0.5),
        StatRow(1, "f2", "x0 * x1", 0, -3.0, 0.0, -np.inf, 0.0),
        StatRow(0, "f1", "x0", 1, 0.0, 0.0, 0.0, 1.0),
        StatRow(1, "f2", "x0 * x1", 1, 1.0 / 3.0, 0.1, 5.773502691896258, 0.0001),
    )
    table = StatTable(rows, 4)
    path = store.write_stats(tmp_path / "stats.csv", stats_frame(table))
    assert store.read_stats(path, 4) == table


def test_write_text_uses_unix_newlines(tmp_path):
    path = store.write_text(tmp_path / "sub" / "model.txt", "P0 = 0\nred flag\n")
    assert path.read_bytes() == b"P0 = 0\nred flag\n"
