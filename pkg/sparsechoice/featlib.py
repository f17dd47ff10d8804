"""Library matrix construction.

A library is an ordered plan of templates, each applied to a list of target
columns.  Targets live either in covariate space (``x0 .. x{r-1}``) or in library
space (columns already appended by earlier entries), so compositional libraries
such as "log of every previously built column" are declared directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from sparsechoice.config import LibraryConfig
from sparsechoice.errors import EvaluationError, LibraryError
from sparsechoice.exprlib import (
    ColumnRef,
    Expr,
    VariableRef,
    eval_expr,
    format_expr,
    has_slot,
    parse_expr,
    substitute_slot,
)
from sparsechoice.observability import log_event

logger = logging.getLogger(__name__)

__all__ = [
    "LibraryEntry",
    "LibrarySpec",
    "LibraryMatrix",
    "build_library",
    "reconstruct",
]

Space = Literal["covariate", "library"]
Scaling = Literal["none", "unit_l2"]


@dataclass(frozen=True)
class LibraryEntry:
    template: Expr
    targets: tuple[int, ...]
    space: Space = "covariate"

    def __post_init__(self) -> None:
        if not has_slot(self.template):
            raise LibraryError(f"template {format_expr(self.template)!r} has no free slot")
        if self.space not in ("covariate", "library"):
            raise LibraryError(f"unknown target space {self.space!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True)
class LibrarySpec:
    entries: tuple[LibraryEntry, ...] = ()
    name_offset: int = 0

    @property
    def size(self) -> int:
        return sum(len(e.targets) for e in self.entries)

    @classmethod
    def from_config(cls, config: LibraryConfig) -> LibrarySpec:
        entries = tuple(
            LibraryEntry(parse_expr(e.expr), tuple(e.indices()), e.space) for e in config.entries
        )
        return cls(entries, config.name_offset)


@dataclass(frozen=True)
class LibraryMatrix:
    """Evaluated library.

    ``values`` is what the solver sees: ``raw_values * scale_factors`` column-wise.
    With ``scaling="none"`` every scale factor is 1 and both arrays coincide.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    names: tuple[str, ...]
    scaling: Scaling = "none"
    norms: np.ndarray | None = None
    scale_factors: np.ndarray | None = None
    raw_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise LibraryError(f"library matrix must be 2-D, got shape {values.shape}")
        k = values.shape[1]
        if len(self.labels) != k or len(self.names) != k:
            raise LibraryError(f"{k} columns but {len(self.labels)} labels and {len(self.names)} names")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "names", tuple(self.names))
        if self.raw_values is None:
            object.__setattr__(self, "raw_values", values)
        if self.scale_factors is None:
            object.__setattr__(self, "scale_factors", np.ones(k))
        if self.norms is None:
            with np.errstate(over="ignore", invalid="ignore"):
                object.__setattr__(self, "norms", np.linalg.norm(self.raw_values, axis=0))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]

    def unscale(self, zeta: np.ndarray) -> np.ndarray:
        """Map coefficients of ``values`` to coefficients of ``raw_values``."""
        zeta = np.asarray(zeta, dtype=float)
        factors = self.scale_factors if zeta.ndim == 1 else self.scale_factors[:, None]
        return zeta * factors


def _unit_l2_factors(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.linalg.norm(raw, axis=0)
    factors = np.ones_like(norms)
    ok = np.isfinite(norms) & (norms > 0)
    factors[ok] = 1.0 / norms[ok]
    return norms, factors


def _covariate_values(covariates) -> np.ndarray:
    X = np.asarray(getattr(covariates, "values", covariates), dtype=float)
    if X.ndim != 2:
        raise LibraryError(f"covariates must be a 2-D table, got shape {X.shape}")
    return X


def build_library(spec: LibrarySpec, covariates, scaling: Scaling = "none") -> LibraryMatrix:
    """Evaluate every entry of ``spec`` over ``covariates`` in declaration order.

    Column labels are fully expanded: a library-space application is labelled with
    the target column's own expression substituted into the template, so every
    label evaluates on the covariates alone.
    """

    if spec.size == 0:
        raise LibraryError("empty library")
    if scaling not in ("none", "unit_l2"):
        raise LibraryError(f"unknown scaling {scaling!r}")
    X = _covariate_values(covariates)
    r = X.shape[1]

    columns: list[np.ndarray] = []
    exprs: list[Expr] = []
    labels: list[str] = []
    for entry in spec.entries:
        template_text = format_expr(entry.template)
        for target in entry.targets:
            if entry.space == "covariate":
                if target >= r:
                    raise LibraryError(
                        f"covariate target x{target} out of range for {template_text!r} "
                        f"(table has {r} columns)"
                    )
                evaluated = substitute_slot(entry.template, VariableRef(target))
                expanded = evaluated
            else:
                if target >= len(columns):
                    raise LibraryError(
                        f"library target c{target} of {template_text!r} is not built yet "
                        f"({len(columns)} columns available)"
                    )
                evaluated = substitute_slot(entry.template, ColumnRef(target))
                expanded = substitute_slot(entry.template, exprs[target])
            label = format_expr(expanded)
            try:
                column = eval_expr(evaluated, X, columns)
            except EvaluationError as exc:
                raise LibraryError(f"column {label!r}: {exc}", label=label, row=exc.row) from exc
            columns.append(column)
            exprs.append(expanded)
            labels.append(label)

    names = tuple(f"f{spec.name_offset + j}" for j in range(len(columns)))
    raw = np.column_stack(columns)
    zero = np.flatnonzero(~raw.any(axis=0))
    for j in zero:
        logger.warning("library column %s (%s) is identically zero", names[j], labels[j])
        log_event("featlib.zero_column", {"name": names[j], "label": labels[j]})

    if scaling == "unit_l2":
        norms, factors = _unit_l2_factors(raw)
        with np.errstate(over="ignore", invalid="ignore"):
            values = raw * factors
        return LibraryMatrix(values, tuple(labels), names, scaling, norms, factors, raw)
    return LibraryMatrix(raw, tuple(labels), names)


def reconstruct(library: LibraryMatrix, zeta: np.ndarray, alternative: int = 0) -> np.ndarray:
    """Predicted probability ``raw F . (scale_factors * zeta[:, a])``; never clamped.

    ``zeta`` holds coefficients of ``library.values`` (k, or k x A).
    """

    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim == 1:
        zeta = zeta[:, None]
    if zeta.ndim != 2 or zeta.shape[0] != library.columns:
        raise LibraryError(
            f"coefficient matrix has shape {zeta.shape}, expected {library.columns} rows"
        )
    if not 0 <= alternative < zeta.shape[1]:
        raise LibraryError(f"alternative {alternative} out of range ({zeta.shape[1]} available)")
    return library.raw_values @ library.unscale(zeta[:, alternative])


def columns_from_labels(labels: Sequence[str], covariates) -> np.ndarray:
    """Re-evaluate label strings; the inverse of the labelling done by :func:`build_library`."""

    X = _covariate_values(covariates)
    return np.column_stack([eval_expr(parse_expr(label), X) for label in labels])
