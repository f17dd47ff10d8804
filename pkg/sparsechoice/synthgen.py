"""Synthetic choice datasets.

Two generators are provided: a binary logit whose utility is a sum of linear and
interaction terms over five uniform(-1, 1) covariates, and a two-alternative
fractional model over forty uniform(0, 100) covariates whose shares are ratios of
strongly non-linear utilities.  Choices are drawn per row from the true shares and
aggregated into empirical probabilities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from sparsechoice.config import GeneratorConfig
from sparsechoice.errors import AggregationError, GenerationError
from sparsechoice.observability import log_event
from sparsechoice.rng import CHOICE_STREAM, COVARIATE_STREAM, stream

logger = logging.getLogger(__name__)

__all__ = [
    "CovariateTable",
    "EmpiricalProbabilities",
    "GeneratedData",
    "binary_utility",
    "complex_utilities",
    "fractional_shares",
    "gen_binary",
    "gen_complex",
    "generate",
    "draw_and_aggregate",
]

BINARY_COLUMNS = 5
COMPLEX_COLUMNS = 40
REGENERATION_FACTOR = 1000


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CovariateTable:
    """J rows of r explanatory variables."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"covariate table must be J x r with J, r >= 1, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("covariate table contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EmpiricalProbabilities:
    """Observed choice shares, one column per alternative.

    ``replicates`` is the number of simulated draws per row when known; shares are
    then integer multiples of ``1 / replicates``.
    """

    shares: np.ndarray
    replicates: int | None = None

    def __post_init__(self) -> None:
        shares = _frozen(self.shares)
        if shares.ndim != 2 or shares.shape[0] < 1 or shares.shape[1] < 1:
            raise ValueError(f"shares must be J x A with J, A >= 1, got {shares.shape}")
        if not np.isfinite(shares).all() or (shares < 0).any() or (shares > 1).any():
            raise ValueError("shares must lie in [0, 1]")
        if shares.shape[1] >= 2 and not np.allclose(shares.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("share rows must sum to 1")
        if self.replicates is not None:
            if self.replicates < 1:
                raise ValueError("replicates must be >= 1")
            scaled = shares * self.replicates
            if not np.allclose(scaled, np.round(scaled), rtol=0, atol=1e-6):
                raise ValueError(f"shares are not multiples of 1/{self.replicates}")
        object.__setattr__(self, "shares", shares)

    @property
    def rows(self) -> int:
        return self.shares.shape[0]

    @property
    def alternatives(self) -> int:
        return self.shares.shape[1]


class GeneratedData(NamedTuple):
    covariates: CovariateTable
    true_probs: np.ndarray  # J x A
    regenerated_rows: int = 0

    @property
    def primary(self) -> np.ndarray:
        """Share of the first alternative (P1)."""
        return self.true_probs[:, 0]


def binary_utility(X: np.ndarray) -> np.ndarray:
    """V1 = 2 x0 + 3 x1 + 0.5 x2 x3 + x2 x4."""

    X = np.asarray(X, dtype=float)
    return 2.0 * X[:, 0] + 3.0 * X[:, 1] + 0.5 * X[:, 2] * X[:, 3] + X[:, 2] * X[:, 4]


def complex_utilities(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Utilities of the fractional scenario; may overflow to +inf."""

    X = np.asarray(X, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        v1 = (
            0.5 * X[:, 31] ** 2
            + np.sqrt(np.abs(X[:, 33]))
            + X[:, 35] ** 3
            + 2.0 * np.log(X[:, 37])
            + 4.0 * np.exp(X[:, 39])
        )
        v2 = (
            0.8 * np.sin(X[:, 21])
            + 0.6 * np.cos(X[:, 22])
            + 0.4 * np.tanh(X[:, 23])
            + 0.2 * np.exp(X[:, 24])
        )
    return v1, v2


def fractional_shares(v1: np.ndarray, v2: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shares V1/(V1+V2), V2/(V1+V2) with saturation.

    Returns ``(p1, p2, invalid)``; ``invalid`` marks rows that must be redrawn
    (both utilities infinite, NaN, or a negative/undefined share).
    """

    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    p1 = np.zeros_like(v1)
    p2 = np.zeros_like(v2)

    invalid = np.isnan(v1) | np.isnan(v2) | np.isneginf(v1) | np.isneginf(v2)
    invalid |= np.isposinf(v1) & np.isposinf(v2)
    only1 = np.isposinf(v1) & np.isfinite(v2)
    only2 = np.isposinf(v2) & np.isfinite(v1)
    p1[only1] = 1.0
    p2[only2] = 1.0

    finite = np.isfinite(v1) & np.isfinite(v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        # normalise by the larger magnitude so the sum cannot overflow
        scale = np.maximum(np.abs(v1), np.abs(v2))
        a = v1 / scale
        b = v2 / scale
        total = a + b
        r1 = a / total
        r2 = b / total
    ok = finite & (scale > 0) & (total > 0) & (r1 >= 0) & (r2 >= 0)
    p1[ok] = r1[ok]
    p2[ok] = r2[ok]
    invalid |= finite & ~ok
    return p1, p2, invalid


def _check_scenario(config: GeneratorConfig, expected: str) -> None:
    if config.scenario != expected:
        raise GenerationError(f"scenario {config.scenario!r} cannot be generated as {expected!r}")


def gen_binary(config: GeneratorConfig) -> GeneratedData:
    _check_scenario(config, "binary_logit")
    low, high = config.covariate_range()
    X = np.vstack(
        [
            stream(config.seed, COVARIATE_STREAM, i).uniform(low, high, size=BINARY_COLUMNS)
            for i in range(config.rows)
        ]
    )
    p1 = expit(binary_utility(X))
    return GeneratedData(CovariateTable(X), np.column_stack([p1, 1.0 - p1]))


def gen_complex(config: GeneratorConfig) -> GeneratedData:
    _check_scenario(config, "complex_fractional")
    low, high = config.covariate_range()
    rngs = [stream(config.seed, COVARIATE_STREAM, i) for i in range(config.rows)]
    X = np.vstack([rng.uniform(low, high, size=COMPLEX_COLUMNS) for rng in rngs])
    p1, p2, invalid = fractional_shares(*complex_utilities(X))

    budget = REGENERATION_FACTOR * config.rows
    regenerated = 0
    while invalid.any():
        bad = np.flatnonzero(invalid)
        regenerated += bad.size
        if regenerated > budget:
            raise GenerationError(
                f"row regeneration exceeded {budget} attempts for {config.rows} rows"
            )
        for i in bad:
            X[i] = rngs[i].uniform(low, high, size=COMPLEX_COLUMNS)
        q1, q2, still = fractional_shares(*complex_utilities(X[bad]))
        p1[bad], p2[bad] = q1, q2
        invalid[:] = False
        invalid[bad] = still

    if regenerated:
        logger.info("regenerated %d rows with undefined shares", regenerated)
        log_event("synthgen.regenerated", {"rows": config.rows, "regenerated": regenerated})
    return GeneratedData(CovariateTable(X), np.column_stack([p1, p2]), regenerated)


def generate(config: GeneratorConfig) -> GeneratedData:
    if config.scenario == "binary_logit":
        return gen_binary(config)
    return gen_complex(config)


def draw_and_aggregate(true_probs: np.ndarray, replicates: int, seed: int) -> EmpiricalProbabilities:
    """Draw ``replicates`` categorical choices per row and return the shares.

    A 1-D ``true_probs`` is read as the first-alternative probability of a binary
    choice.
    """

    P = np.asarray(true_probs, dtype=float)
    if P.ndim == 1:
        P = np.column_stack([P, 1.0 - P])
    if P.ndim != 2:
        raise AggregationError(f"true probabilities must be J x A, got shape {P.shape}")
    if replicates < 1:
        raise AggregationError(f"replicates must be >= 1, got {replicates}")
    if not np.isfinite(P).all() or (P < -1e-12).any():
        raise AggregationError("true probabilities must be finite and non-negative")
    sums = P.sum(axis=1)
    off = np.abs(sums - 1.0) > 1e-9
    if off.any():
        row = int(np.flatnonzero(off)[0])
        raise AggregationError(f"probabilities of row {row} sum to {sums[row]!r}, not 1")

    P = np.clip(P, 0.0, None)
    P = P / P.sum(axis=1, keepdims=True)
    counts = np.vstack(
        [stream(seed, CHOICE_STREAM, i).multinomial(replicates, P[i]) for i in range(P.shape[0])]
    )
    return EmpiricalProbabilities(counts / replicates, replicates)
