from pathlib import Path

import numpy as np
import pytest

from sparsechoice.config import GeneratorConfig, LibraryConfig, load_config, load_library
from sparsechoice.errors import LibraryError
from sparsechoice.exprlib import parse_expr
from sparsechoice.featlib import (
    LibraryEntry,
    LibrarySpec,
    build_library,
    columns_from_labels,
    reconstruct,
)
from sparsechoice.synthgen import gen_binary, gen_complex

CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"

LOGIT_LABELS = [
    "x0",
    "x1",
    "x2",
    "x3",
    "x4",
    "x1 * x2",
    "x2 * x3",
    "x2 * x4",
    "2 * x0 + 3 * x1 + 0.5 * x2 * x3 + x2 * x4",
    "1 / (1 + exp(-(2 * x0 + 3 * x1 + 0.5 * x2 * x3 + x2 * x4)))",
]


@pytest.fixture(scope="module")
def binary_data():
    return gen_binary(GeneratorConfig(scenario="binary_logit", rows=60, seed=21))


@pytest.fixture(scope="module")
def complex_data():
    return gen_complex(GeneratorConfig(scenario="complex_fractional", rows=30, seed=22))


@pytest.fixture(scope="module")
def logit_spec():
    return LibrarySpec.from_config(load_config(CONFIG_DIR / "exp1.json").library)


def _spec(*entries, name_offset=0):
    return LibrarySpec(
        tuple(LibraryEntry(parse_expr(src), tuple(targets), space) for src, targets, space in entries),
        name_offset,
    )


def test_logit_library(binary_data, logit_spec):
    library = build_library(logit_spec, binary_data.covariates)
    assert library.columns == 10
    assert library.names == tuple(f"f{j}" for j in range(1, 11))
    assert list(library.labels) == LOGIT_LABELS
    np.testing.assert_allclose(library.values[:, 9], binary_data.primary, rtol=1e-14)


def test_compositional_library_has_759_columns(complex_data):
    spec = LibrarySpec.from_config(load_library(CONFIG_DIR / "libraries" / "compositional.yaml"))
    assert spec.size == 759
    library = build_library(spec, complex_data.covariates)
    assert library.values.shape == (30, 759)
    assert library.names[0] == "f0"
    assert library.names[-1] == "f758"
    assert library.labels[0] == "x0"
    # the last entry reads library column 319, the first arctan column
    assert library.labels[-1] == "log(clip(arctan(x0) + 1e-09, 1e-09, inf)) / (clip(arctan(x0) + 1e-09, 1e-09, inf) + 1e-09)"
    assert np.isfinite(library.values).all()


def test_labels_reproduce_columns(complex_data):
    spec = LibrarySpec.from_config(load_library(CONFIG_DIR / "libraries" / "compositional.yaml"))
    library = build_library(spec, complex_data.covariates)
    rebuilt = columns_from_labels(library.labels, complex_data.covariates)
    np.testing.assert_allclose(rebuilt, library.raw_values, rtol=1e-12, atol=0)


def test_build_is_deterministic(binary_data, logit_spec):
    first = build_library(logit_spec, binary_data.covariates)
    second = build_library(logit_spec, binary_data.covariates)
    np.testing.assert_array_equal(first.values, second.values)


def test_unit_l2_scaling_round_trip(binary_data, logit_spec):
    plain = build_library(logit_spec, binary_data.covariates)
    scaled = build_library(logit_spec, binary_data.covariates, scaling="unit_l2")
    np.testing.assert_allclose(np.linalg.norm(scaled.values, axis=0), 1.0, rtol=1e-12)
    np.testing.assert_array_equal(scaled.raw_values, plain.values)

    zeta = np.random.default_rng(0).normal(size=10)
    np.testing.assert_allclose(
        reconstruct(scaled, zeta), scaled.values @ zeta, rtol=1e-10, atol=1e-12
    )
    np.testing.assert_allclose(
        reconstruct(scaled, zeta), reconstruct(plain, scaled.unscale(zeta)), rtol=1e-12, atol=1e-14
    )


def test_empty_library(binary_data):
    with pytest.raises(LibraryError, match="empty library"):
        build_library(LibrarySpec(), binary_data.covariates)


def test_target_out_of_range(binary_data):
    with pytest.raises(LibraryError, match="x7"):
        build_library(_spec(("x", [7], "covariate")), binary_data.covariates)


def test_forward_library_reference_is_rejected(binary_data):
    spec = _spec(("x", [0, 1], "covariate"), ("exp(x)", [2], "library"))
    with pytest.raises(LibraryError, match="not built yet"):
        build_library(spec, binary_data.covariates)


def test_library_space_labels_are_expanded(binary_data):
    spec = _spec(("power(x, 2)", [0, 1], "covariate"), ("exp(x)", [1], "library"))
    library = build_library(spec, binary_data.covariates)
    assert library.labels == ("power(x0, 2)", "power(x1, 2)", "exp(power(x1, 2))")
    np.testing.assert_allclose(library.values[:, 2], np.exp(library.values[:, 1]), rtol=1e-15)


def test_evaluation_error_names_label_and_row():
    X = np.array([[1.0], [2.0], [0.0], [3.0]])
    with pytest.raises(LibraryError) as excinfo:
        build_library(_spec(("log(x)", [0], "covariate")), X)
    assert excinfo.value.label == "log(x0)"
    assert excinfo.value.row == 2


def test_zero_column_warns(caplog, event_log):
    X = np.array([[0.0, 1.0], [0.0, 2.0]])
    with caplog.at_level("WARNING"):
        library = build_library(_spec(("x", [0, 1], "covariate")), X)
    assert library.columns == 2
    assert "identically zero" in caplog.text
    assert "featlib.zero_column" in event_log.read_text(encoding="utf-8")


def test_reconstruct(binary_data, logit_spec):
    library = build_library(logit_spec, binary_data.covariates)
    np.testing.assert_array_equal(reconstruct(library, np.zeros(10)), np.zeros(60))
    unit = np.zeros((10, 2))
    unit[4, 1] = 1.0
    np.testing.assert_array_equal(reconstruct(library, unit, alternative=1), library.values[:, 4])
    with pytest.raises(LibraryError):
        reconstruct(library, np.zeros(9))
    with pytest.raises(LibraryError):
        reconstruct(library, unit, alternative=2)


def test_library_config_accepts_ranges():
    config = LibraryConfig(
        entries=[{"expr": "tanh(x)", "targets": {"start": 2, "stop": 6, "exclude": [4]}}]
    )
    assert LibrarySpec.from_config(config).entries[0].targets == (2, 3, 5)
