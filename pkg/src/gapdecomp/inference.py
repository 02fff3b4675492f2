"""Bootstrap standard errors/intervals and the proportion-reduced arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .analysis import AnalysisSpec, Scale
from .data import Dataset, Role
from .errors import AnalysisError, DegenerateInitial, InvalidB, TooManyFailures

DEFAULT_REPLICATES = 1000
_FAILURE_LIMIT = 0.10
_DEGENERACY_TOL = 1e-12


def proportion_reduced(initial: float, residual: float, scale=Scale.ADDITIVE) -> float:
    """Fraction of the initial disparity removed by the intervention.

    On the additive scale this is (initial - residual) / initial; for
    ratio-scale quantities the relative version (initial - residual) /
    (initial - 1) is used, which treats a ratio of 1 as "no disparity".
    Values outside [0, 1] are legitimate (overshoot / sign flips).

    Raises
    ------
    DegenerateInitial
        When the denominator is within 1e-12 of zero.
    """
    scale = Scale.RATIO if str(scale).upper().endswith(("RATIO", "RELATIVE")) else Scale.ADDITIVE
    if scale == Scale.ADDITIVE:
        if abs(initial) <= _DEGENERACY_TOL:
            raise DegenerateInitial(
                f"initial disparity {initial!r} is null; proportion reduced is undefined"
            )
        return (initial - residual) / initial
    if abs(initial - 1.0) <= _DEGENERACY_TOL:
        raise DegenerateInitial(
            f"initial ratio {initial!r} is 1; relative proportion reduced is undefined"
        )
    return (initial - residual) / (initial - 1.0)


def proportion_with_note(initial, residual, scale):
    """proportion_reduced, but degeneracy becomes (None, explanatory note)."""
    try:
        return proportion_reduced(initial, residual, scale), ()
    except DegenerateInitial as err:
        return None, (str(err),)


@dataclass(frozen=True)
class QuantitySummary:
    """Point estimate plus bootstrap spread for one reported quantity."""

    point: float | None
    se: float
    lower: float
    upper: float

    def as_dict(self) -> dict:
        return {
            "point": self.point,
            "se": self.se,
            "percentile_2.5": self.lower,
            "percentile_97.5": self.upper,
        }


@dataclass(frozen=True)
class BootstrapSummary:
    """Resampling summary: point estimates are always the full-sample values."""

    b: int
    seed: int
    quantities: Mapping[str, QuantitySummary]
    n_failed: int
    failure_reasons: tuple[str, ...]
    stratified: bool = False

    def as_dict(self) -> dict:
        return {
            "replicates": self.b,
            "seed": self.seed,
            "stratified": self.stratified,
            "failed_replicates": self.n_failed,
            "failure_reasons": list(self.failure_reasons),
            "quantities": {k: v.as_dict() for k, v in self.quantities.items()},
        }


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    # Counter-based: each replicate's stream is keyed by (seed, index), so
    # draws are independent of evaluation order and stable under extending B.
    key = np.array([seed % (1 << 64), index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def resample_indices(
    d: Dataset, seed: int, index: int, stratify_by_group: bool = False
) -> np.ndarray:
    """Row indices for one bootstrap replicate (same n, with replacement)."""
    rng = _replicate_rng(seed, index)
    n = d.n_rows
    if not stratify_by_group:
        return rng.integers(0, n, size=n)
    group = d.column(d.single_role_column(Role.GROUP))
    parts = []
    for value in (0.0, 1.0):
        rows = np.flatnonzero(group == value)
        parts.append(rows[rng.integers(0, rows.size, size=rows.size)])
    return np.concatenate(parts)


def bootstrap_statistic(
    d: Dataset,
    statistic: Callable[[Dataset], Mapping[str, float | None] | float],
    b: int = DEFAULT_REPLICATES,
    seed: int = 0,
    stratify_by_group: bool = False,
) -> BootstrapSummary:
    """Nonparametric bootstrap of an arbitrary statistic of the dataset.

    ``statistic`` may return a single float or a mapping of named floats
    (None values are allowed and simply excluded from that quantity's
    spread). Replicates raising package errors are recorded and excluded;
    more than 10% failures aborts with TooManyFailures.
    """
    if b < 2:
        raise InvalidB(f"bootstrap needs at least 2 replicates, got {b}")
    full = statistic(d)
    if not isinstance(full, Mapping):
        full = {"statistic": float(full)}
    names = list(full)

    draws: dict[str, list[float]] = {name: [] for name in names}
    failures: list[str] = []
    for index in range(b):
        resampled = d.take(resample_indices(d, seed, index, stratify_by_group))
        try:
            value = statistic(resampled)
        except AnalysisError as err:
            failures.append(f"replicate {index}: {type(err).__name__}: {err}")
            continue
        if not isinstance(value, Mapping):
            value = {"statistic": float(value)}
        for name in names:
            v = value.get(name)
            if v is not None:
                draws[name].append(float(v))
    if len(failures) > _FAILURE_LIMIT * b:
        raise TooManyFailures(
            f"{len(failures)} of {b} bootstrap replicates failed "
            f"(limit {_FAILURE_LIMIT:.0%}); first: {failures[0]}"
        )

    quantities = {}
    for name in names:
        values = np.asarray(draws[name])
        if values.size >= 2:
            se = float(values.std(ddof=1))
            lower, upper = (float(q) for q in np.percentile(values, [2.5, 97.5]))
        else:
            se = lower = upper = float("nan")
        point = full[name]
        quantities[name] = QuantitySummary(
            point=None if point is None else float(point),
            se=se, lower=lower, upper=upper,
        )
    return BootstrapSummary(
        b=b, seed=seed, quantities=quantities, n_failed=len(failures),
        failure_reasons=tuple(failures), stratified=stratify_by_group,
    )


def bootstrap(
    d: Dataset,
    spec: AnalysisSpec,
    b: int = DEFAULT_REPLICATES,
    seed: int = 0,
    stratify_by_group: bool = False,
) -> BootstrapSummary:
    """Bootstrap the four reported quantities of one decomposition run."""
    from .engine import estimate  # deferred: engine pulls in every estimator

    def statistic(data: Dataset):
        result = estimate(data, spec)
        return {
            "initial": result.initial,
            "residual": result.residual,
            "reduction": result.reduction,
            "proportion_reduced": result.proportion_reduced,
        }

    return bootstrap_statistic(d, statistic, b=b, seed=seed,
                               stratify_by_group=stratify_by_group)
