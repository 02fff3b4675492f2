"""Regression-coefficient decompositions for the four interventions.

Two families are implemented on top of the shared regression engine:

* SUCCESSIVE — a ladder of nested outcome regressions (group only; plus the
  early measures; plus the target), with each intervention's residual and
  reduction read off coefficient differences of the group term.
* PRODUCT — one outcome model plus auxiliary models for the target and the
  early measure, combined through coefficient products.

On a common analysis sample the two families agree to floating-point
precision — that is nested-least-squares algebra, not an asymptotic
approximation — and the test suite enforces it.

For a rare binary outcome the same coefficient expressions are exponentiated
and reported on the ratio scale.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .analysis import (
    P2_ANCHOR_NOTE,
    AnalysisSpec,
    DecompositionEstimate,
    Estimator,
    OutcomeFamily,
    Proposition,
    Scale,
)
from .data import Dataset, Role
from .errors import InvalidSpec, NearZeroDenominator, PrevalenceWarning, UnknownColumn
from .inference import proportion_with_note
from .regression import CoefficientSet, DesignMatrix, fit_logistic, fit_ols

#: Outcome prevalence above which the rare-outcome ratio algebra is suspect.
RARE_PREVALENCE_LIMIT = 0.10


def analysis_rows(d: Dataset, columns) -> np.ndarray:
    """Boolean mask of rows with no missing cell in any listed column.

    Every model inside one run is fit on this common mask (rows complete for
    the largest model), which is what makes the cross-family identities exact.
    """
    mask = np.ones(d.n_rows, dtype=bool)
    for name in columns:
        mask &= ~np.isnan(d.column(name))
    return mask


def _fit(d, outcome, regressors, rows, logistic=False) -> CoefficientSet:
    design = DesignMatrix.from_dataset(d, regressors, rows=rows)
    y = d.column(outcome)[rows]
    return fit_logistic(design, y) if logistic else fit_ols(design, y)


def _model_name(outcome: str, regressors) -> str:
    return f"{outcome} ~ " + " + ".join(regressors)


def _check_denominator(value: float, natural_scale: float, label: str) -> None:
    if abs(value) < 1e-8 * natural_scale:
        raise NearZeroDenominator(
            f"slope of {label} is {value:.3g}, below 1e-8 of its natural scale "
            f"({natural_scale:.3g}); the within-level share needed by this "
            "proposition is undefined"
        )


def _slope_scale(d, outcome, column, rows, logistic=False) -> float:
    """Natural magnitude of a slope: sd(y)/sd(x), or 1/sd(x) on the log-odds scale."""
    x_sd = float(np.std(d.column(column)[rows]))
    if x_sd == 0.0:
        return 1.0
    if logistic:
        return 1.0 / x_sd
    y_sd = float(np.std(d.column(outcome)[rows]))
    return (y_sd if y_sd > 0 else 1.0) / x_sd


def _build(spec, prop, scale, initial, residual, reduction, coefficients, notes=()):
    proportion, extra = proportion_with_note(initial, residual, scale)
    return DecompositionEstimate(
        proposition=prop,
        scale=scale,
        initial=initial,
        residual=residual,
        reduction=reduction,
        proportion_reduced=proportion,
        estimator=spec.estimator.value,
        coefficients=coefficients,
        notes=tuple(notes) + extra,
    )


# ---------------------------------------------------------------------------
# SUCCESSIVE family, continuous outcome
# ---------------------------------------------------------------------------


def decompose_successive_linear(d: Dataset, spec: AnalysisSpec) -> DecompositionEstimate:
    """Nested-regressions decomposition with a single early measure.

    Fits outcome-on-group, +early, +target regressions on one common sample
    and reads each proposition's residual/reduction from differences of the
    group coefficient (and, for the marginal-target intervention, the ratio
    of early-measure slopes between the two larger models).
    """
    d = spec.resolve(d)
    if spec.outcome_family == OutcomeFamily.RARE_BINARY:
        return decompose_logistic_rare(d, spec)
    prop = spec.proposition
    y = d.single_role_column(Role.OUTCOME)
    r = d.single_role_column(Role.GROUP)
    early = d.role_columns(Role.EARLY)
    if len(early) != 1:
        return decompose_successive_multiX(d, spec)
    x = early[0]
    c = list(d.covariate_names())
    m = d.single_role_column(Role.TARGET) if d.role_columns(Role.TARGET) else None

    need_target = prop != Proposition.P1
    used = [y, r, x, *c] + ([m] if m is not None else [])
    if need_target and m is None:
        raise InvalidSpec(f"{prop.value} requires a target column")
    rows = analysis_rows(d, used)

    base = _fit(d, y, [r, *c], rows)
    with_early = _fit(d, y, [r, x, *c], rows)
    models = {
        _model_name(y, [r, *c]): base.as_dict(),
        _model_name(y, [r, x, *c]): with_early.as_dict(),
    }
    full = None
    if m is not None:
        full = _fit(d, y, [r, x, m, *c], rows)
        models[_model_name(y, [r, x, m, *c])] = full.as_dict()

    if prop == Proposition.P1:
        initial, residual = base[r], with_early[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models)
    if prop == Proposition.P2:
        initial, residual = with_early[r], full[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models, notes=(P2_ANCHOR_NOTE,))
    if prop == Proposition.P3:
        initial, residual = base[r], full[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models)
    if prop == Proposition.P4:
        _check_denominator(with_early[x], _slope_scale(d, y, x, rows), x)
        share = full[x] / with_early[x]
        gap = base[r] - with_early[r]
        residual = full[r] + share * gap
        reduction = (with_early[r] - full[r]) + (1.0 - share) * gap
        return _build(spec, prop, Scale.ADDITIVE, base[r], residual, reduction, models)
    raise InvalidSpec(f"{prop.value} has no nested-regressions form")


def decompose_successive_multiX(d: Dataset, spec: AnalysisSpec) -> DecompositionEstimate:
    """Nested-regressions decomposition with several early measures.

    The ladder adds the early measures one at a time (in their declared
    order) before the target enters. For the marginal-target intervention the
    group gap in each early measure, within covariate strata and in-sample, is
    recovered by forward substitution from the ladder's group and early-slope
    coefficients; the residual then reweights those gaps by the full model's
    early slopes.
    """
    d = spec.resolve(d)
    prop = spec.proposition
    y = d.single_role_column(Role.OUTCOME)
    r = d.single_role_column(Role.GROUP)
    xs = list(d.role_columns(Role.EARLY))
    c = list(d.covariate_names())
    m = d.single_role_column(Role.TARGET) if d.role_columns(Role.TARGET) else None
    if spec.outcome_family != OutcomeFamily.CONTINUOUS:
        raise InvalidSpec("multi-early ladders are implemented for continuous outcomes")
    if prop != Proposition.P1 and m is None:
        raise InvalidSpec(f"{prop.value} requires a target column")

    used = [y, r, *xs, *c] + ([m] if m is not None else [])
    rows = analysis_rows(d, used)

    base = _fit(d, y, [r, *c], rows)
    ladder = [_fit(d, y, [r, *xs[: j + 1], *c], rows) for j in range(len(xs))]
    widest = ladder[-1]
    models = {_model_name(y, [r, *c]): base.as_dict()}
    for j, fit in enumerate(ladder):
        models[_model_name(y, [r, *xs[: j + 1], *c])] = fit.as_dict()
    full = None
    if m is not None:
        full = _fit(d, y, [r, *xs, m, *c], rows)
        models[_model_name(y, [r, *xs, m, *c])] = full.as_dict()

    if prop == Proposition.P1:
        initial, residual = base[r], widest[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models)
    if prop == Proposition.P2:
        initial, residual = widest[r], full[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models, notes=(P2_ANCHOR_NOTE,))
    if prop == Proposition.P3:
        initial, residual = base[r], full[r]
        return _build(spec, prop, Scale.ADDITIVE, initial, residual,
                      initial - residual, models)
    if prop == Proposition.P4:
        # Forward-substitute the ladder for the per-measure group gaps.
        gaps = []
        for j, fit in enumerate(ladder):
            _check_denominator(fit[xs[j]], _slope_scale(d, y, xs[j], rows), xs[j])
            numerator = base[r] - fit[r]
            for i in range(j):
                numerator -= fit[xs[i]] * gaps[i]
            gaps.append(numerator / fit[xs[j]])
        residual = full[r] + sum(full[x] * g for x, g in zip(xs, gaps))
        reduction = (widest[r] - full[r]) + sum(
            (widest[x] - full[x]) * g for x, g in zip(xs, gaps)
        )
        return _build(spec, prop, Scale.ADDITIVE, base[r], residual, reduction, models)
    raise InvalidSpec(f"{prop.value} has no nested-regressions form")


# ---------------------------------------------------------------------------
# PRODUCT family
# ---------------------------------------------------------------------------


def decompose_product_coefficients(d: Dataset, spec: AnalysisSpec) -> DecompositionEstimate:
    """Decomposition from outcome, target, and early-measure models.

    The group's indirect routes are coefficient products: the early model's
    group slope times the outcome's early slope, the target model's group
    slope times the outcome's target slope, and the chained product through
    both. Agrees with the nested-regressions family identically in-sample.
    """
    d = spec.resolve(d)
    if spec.outcome_family == OutcomeFamily.RARE_BINARY:
        return decompose_logistic_rare(d, spec)
    prop = spec.proposition
    y = d.single_role_column(Role.OUTCOME)
    r = d.single_role_column(Role.GROUP)
    x = d.single_role_column(Role.EARLY)
    m = d.single_role_column(Role.TARGET)
    c = list(d.covariate_names())
    rows = analysis_rows(d, [y, r, x, m, *c])

    outcome = _fit(d, y, [r, x, m, *c], rows)
    target = _fit(d, m, [r, x, *c], rows)
    early = _fit(d, x, [r, *c], rows)
    models = {
        _model_name(y, [r, x, m, *c]): outcome.as_dict(),
        _model_name(m, [r, x, *c]): target.as_dict(),
        _model_name(x, [r, *c]): early.as_dict(),
    }

    through_target = target[r] * outcome[m]             # group -> target -> outcome
    through_early = early[r] * outcome[x]               # group -> early -> outcome
    chained = early[r] * target[x] * outcome[m]         # group -> early -> target -> outcome

    if prop == Proposition.P1:
        residual = outcome[r] + through_target
        reduction = through_early + chained
    elif prop == Proposition.P2:
        residual = outcome[r]
        reduction = through_target
    elif prop == Proposition.P3:
        residual = outcome[r]
        reduction = through_early + through_target + chained
    elif prop == Proposition.P4:
        residual = outcome[r] + through_early
        reduction = through_target + chained
    else:
        raise InvalidSpec(f"{prop.value} has no coefficient-product form")
    notes = (P2_ANCHOR_NOTE,) if prop == Proposition.P2 else ()
    return _build(spec, prop, Scale.ADDITIVE, residual + reduction,
                  residual, reduction, models, notes=notes)


# ---------------------------------------------------------------------------
# Rare binary outcome (ratio scale)
# ---------------------------------------------------------------------------


def decompose_logistic_rare(d: Dataset, spec: AnalysisSpec) -> DecompositionEstimate:
    """Ratio-scale decomposition for a rare 0/1 outcome.

    The continuous-outcome coefficient expressions are reused inside exp{},
    valid because the logit and log links agree for rare outcomes. SUCCESSIVE
    fits the nested ladder with logistic regressions; PRODUCT mixes a logistic
    outcome model with least-squares target/early models. Emits
    PrevalenceWarning (and a report note) when the outcome mean exceeds 10%.
    """
    d = spec.resolve(d)
    prop = spec.proposition
    y = d.single_role_column(Role.OUTCOME)
    r = d.single_role_column(Role.GROUP)
    xs = d.role_columns(Role.EARLY)
    if len(xs) != 1:
        raise InvalidSpec("the ratio-scale decomposition expects a single early measure")
    x = xs[0]
    m = d.single_role_column(Role.TARGET) if d.role_columns(Role.TARGET) else None
    c = list(d.covariate_names())
    need_target = prop != Proposition.P1 or spec.estimator == Estimator.PRODUCT
    if need_target and m is None:
        raise InvalidSpec(f"{prop.value} requires a target column")
    used = [y, r, x, *c] + ([m] if m is not None else [])
    rows = analysis_rows(d, used)

    observed = np.unique(d.column(y)[rows])
    if not np.all(np.isin(observed, (0.0, 1.0))):
        raise InvalidSpec("rare-binary outcome column must be 0/1")
    prevalence = float(d.column(y)[rows].mean())
    notes = []
    if prevalence > RARE_PREVALENCE_LIMIT:
        message = (
            f"outcome prevalence {prevalence:.3f} exceeds "
            f"{RARE_PREVALENCE_LIMIT:.2f}; ratio-scale results rest on a "
            "rare-outcome approximation and may be distorted"
        )
        warnings.warn(message, PrevalenceWarning, stacklevel=2)
        notes.append(message)
    if prop == Proposition.P2:
        notes.append(P2_ANCHOR_NOTE)

    if spec.estimator == Estimator.PRODUCT:
        outcome = _fit(d, y, [r, x, m, *c], rows, logistic=True)
        target = _fit(d, m, [r, x, *c], rows)
        early = _fit(d, x, [r, *c], rows)
        models = {
            _model_name(y, [r, x, m, *c]): outcome.as_dict(),
            _model_name(m, [r, x, *c]): target.as_dict(),
            _model_name(x, [r, *c]): early.as_dict(),
        }
        through_target = target[r] * outcome[m]
        through_early = early[r] * outcome[x]
        chained = early[r] * target[x] * outcome[m]
        pairs = {
            Proposition.P1: (outcome[r] + through_target, through_early + chained),
            Proposition.P2: (outcome[r], through_target),
            Proposition.P3: (outcome[r], through_early + through_target + chained),
            Proposition.P4: (outcome[r] + through_early, through_target + chained),
        }
        if prop not in pairs:
            raise InvalidSpec(f"{prop.value} has no coefficient-product form")
        log_residual, log_reduction = pairs[prop]
    else:
        base = _fit(d, y, [r, *c], rows, logistic=True)
        with_early = _fit(d, y, [r, x, *c], rows, logistic=True)
        models = {
            _model_name(y, [r, *c]): base.as_dict(),
            _model_name(y, [r, x, *c]): with_early.as_dict(),
        }
        full = None
        if m is not None:
            full = _fit(d, y, [r, x, m, *c], rows, logistic=True)
            models[_model_name(y, [r, x, m, *c])] = full.as_dict()
        if prop == Proposition.P1:
            log_residual = with_early[r]
            log_reduction = base[r] - with_early[r]
        elif prop == Proposition.P2:
            log_residual = full[r]
            log_reduction = with_early[r] - full[r]
        elif prop == Proposition.P3:
            log_residual = full[r]
            log_reduction = base[r] - full[r]
        elif prop == Proposition.P4:
            _check_denominator(
                with_early[x], _slope_scale(d, y, x, rows, logistic=True), x
            )
            share = full[x] / with_early[x]
            gap = base[r] - with_early[r]
            log_residual = full[r] + share * gap
            log_reduction = (with_early[r] - full[r]) + (1.0 - share) * gap
        else:
            raise InvalidSpec(f"{prop.value} has no nested-regressions form")

    residual = math.exp(log_residual)
    reduction = math.exp(log_reduction)
    return _build(spec, prop, Scale.RATIO, residual * reduction,
                  residual, reduction, models, notes=notes)
