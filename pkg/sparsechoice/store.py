"""CSV and text artifacts written by the CLI.

All CSVs are UTF-8 with ``\\n`` line endings and shortest round-trip float text, and
are read back with pandas' round-trip float parser so values survive exactly.
"""

from __future__ import annotations
import os
from pathlib import Path
from typing import Iterable, Tuple

import numpy as np
import pandas as pd

from sparsechoice.errors import StoreError
from sparsechoice.featlib import LibraryMatrix
from sparsechoice.sigstats import STATS_COLUMNS, RunEnsemble, StatRow, StatTable
from sparsechoice.synthgen import CovariateTable, EmpiricalProbabilities

COEFFICIENT_COLUMNS = ["run", "seed", "alternative", "base_function", "coefficient"]

PathLike = str | os.PathLike


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def _read_frame(path: PathLike, **kwargs) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise StoreError(f"file not found: {path}")
    return pd.read_csv(path, float_precision="round_trip", encoding="utf-8", **kwargs)


def write_dataset(path: PathLike, covariates: CovariateTable, observed: EmpiricalProbabilities) -> Path:
    frame = pd.DataFrame(covariates.values, columns=[f"x{i}" for i in range(covariates.columns)])
    for a in range(observed.alternatives):
        frame[f"p{a}"] = observed.shares[:, a]
    return _write_frame(frame, path)


def read_dataset(path: PathLike, replicates: int | None = None) -> Tuple[CovariateTable, EmpiricalProbabilities]:
    frame = _read_frame(path)
    xs = [c for c in frame.columns if c.startswith("x")]
    ps = [c for c in frame.columns if c.startswith("p")]
    if xs != [f"x{i}" for i in range(len(xs))] or ps != [f"p{a}" for a in range(len(ps))] or not ps:
        raise StoreError(f"{path}: expected header x0..x(r-1),p0..p(A-1), got {list(frame.columns)}")
    try:
        return (
            CovariateTable(frame[xs].to_numpy(dtype=float)),
            EmpiricalProbabilities(frame[ps].to_numpy(dtype=float), replicates),
        )
    except ValueError as exc:
        raise StoreError(f"{path}: {exc}") from exc


def write_library(path: PathLike, library: LibraryMatrix) -> Path:
    return _write_frame(pd.DataFrame(library.raw_values, columns=list(library.labels)), path)


def read_library(path: PathLike) -> Tuple[list[str], np.ndarray]:
    # labels may repeat, so the header row is read as data rather than as column names
    frame = _read_frame(path, header=None, dtype=str)
    labels = [str(v) for v in frame.iloc[0]]
    return labels, frame.iloc[1:].to_numpy(dtype=float)


def coefficient_frame(records: Iterable[tuple]) -> pd.DataFrame:
    frame = pd.DataFrame(list(records), columns=COEFFICIENT_COLUMNS)
    frame["seed"] = frame["seed"].astype(np.uint64)
    return frame


def write_coefficient_records(path: PathLike, records: Iterable[tuple]) -> Path:
    return _write_frame(coefficient_frame(records), path)


def write_coefficients(path: PathLike, ensemble: RunEnsemble) -> Path:
    return write_coefficient_records(path, ensemble.long_records())


def read_coefficients(path: PathLike) -> pd.DataFrame:
    return _read_frame(path, dtype={"seed": np.uint64})


def write_stats(path: PathLike, frame: pd.DataFrame) -> Path:
    return _write_frame(frame, path)


def read_stats(path: PathLike, n_runs: int) -> StatTable:
    frame = _read_frame(path)
    if list(frame.columns) != STATS_COLUMNS:
        raise StoreError(f"{path}: unexpected stats header {list(frame.columns)}")
    rows = []
    for _, group in frame.groupby("alternative", sort=True):
        for index, rec in enumerate(group.itertuples(index=False)):
            rows.append(
                StatRow(
                    index,
                    str(rec.base_function),
                    str(rec.label),
                    int(rec.alternative),
                    float(rec.mean_coeff),
                    float(rec.sd),
                    float(rec.t_value),
                    float(rec.p_value),
                )
            )
    return StatTable(tuple(rows), n_runs)


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path
