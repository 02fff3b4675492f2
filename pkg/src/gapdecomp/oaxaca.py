"""Group-gap decompositions from group-stratified regressions.

`oaxaca_decompose` splits a gap into an explained portion (covariate-mean
gaps weighted by the reference group's coefficients) and an unexplained
portion (intercept gap plus coefficient gaps weighted at fixed covariate
values), marginally or within strata of conditioning variables.

`proposition_via_oaxaca` maps the four interventions onto those pieces, and
`interaction_model_estimates` computes the same quantities from a single
pooled regression with group interactions. On samples where the conditioning
set is empty (or fully group-interacted) the stratified and pooled routes are
the same algebra, and the test suite runs both to confirm it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .analysis import (
    P2_ANCHOR_NOTE,
    AnalysisSpec,
    DecompositionEstimate,
    Proposition,
    Scale,
)
from .data import Dataset, Role
from .errors import EmptyGroup, InvalidSpec
from .inference import proportion_with_note
from .parametric import analysis_rows, _model_name
from .regression import CoefficientSet, DesignMatrix, fit_ols

INTERCEPT_TERM = "intercept"


@dataclass(frozen=True)
class OBResult:
    """Aggregate and per-term split of a group gap.

    unexplained_terms carries the intercept gap, one coefficient-gap term per
    explanatory variable, and (conditional mode) one per conditioning
    variable; explained_terms carries one mean-gap term per explanatory
    variable. Aggregates are the exact sums of their terms.
    """

    mode: str
    total_gap: float
    unexplained: float
    explained: float
    unexplained_terms: Mapping[str, float]
    explained_terms: Mapping[str, float]
    profile: Mapping[str, float]
    reference: str
    models: Mapping[str, Mapping[str, float]]


def _group_fit(d, y, regressors, rows, label) -> CoefficientSet:
    if not rows.any():
        raise EmptyGroup(f"no usable rows in {label}")
    design = DesignMatrix.from_dataset(d, regressors, rows=rows)
    return fit_ols(design, d.column(y)[rows])


def _conditional_means(
    d: Dataset, variables: Sequence[str], conditioning: Sequence[str],
    rows: np.ndarray, profile_values: np.ndarray,
) -> dict[str, float]:
    """Model-based E[V | group, conditioning = profile] for each variable.

    With an empty conditioning list this is the plain group mean (the
    auxiliary regression is intercept-only).
    """
    out = {}
    for name in variables:
        fit = _group_fit(d, name, list(conditioning), rows, f"auxiliary fit for {name}")
        out[name] = fit[INTERCEPT_TERM] + float(
            np.dot(profile_values, [fit[c] for c in conditioning])
        )
    return out


def oaxaca_decompose(
    d: Dataset,
    explanatory: Sequence[str],
    conditioning: Sequence[str] = (),
    reference: str = "group1",
    profile: Mapping[str, float] | None = None,
) -> OBResult:
    """Explained/unexplained split of the group gap in the outcome.

    Marginal mode (no conditioning variables) decomposes the raw gap in
    means. Conditional mode decomposes the model-implied gap at a fixed
    conditioning profile (default: group-0 means), with the conditioning
    coefficients' gaps entering the unexplained portion evaluated at that
    profile. Reference coefficients default to the group-1 fit.
    """
    if reference not in ("group1", "group0"):
        raise InvalidSpec("reference must be 'group1' or 'group0'")
    y = d.single_role_column(Role.OUTCOME)
    r = d.single_role_column(Role.GROUP)
    explanatory = list(explanatory)
    conditioning = list(conditioning)
    rows = analysis_rows(d, [y, r, *explanatory, *conditioning])
    group = d.column(r)
    rows1 = rows & (group == 1.0)
    rows0 = rows & (group == 0.0)

    regressors = explanatory + conditioning
    fit1 = _group_fit(d, y, regressors, rows1, "group 1")
    fit0 = _group_fit(d, y, regressors, rows0, "group 0")
    models = {
        f"group1: {_model_name(y, regressors)}": fit1.as_dict(),
        f"group0: {_model_name(y, regressors)}": fit0.as_dict(),
    }

    conditional = bool(conditioning)
    if conditional:
        if profile is None:
            profile = {
                name: float(np.mean(d.column(name)[rows0])) for name in conditioning
            }
        else:
            profile = {name: float(profile[name]) for name in conditioning}
        profile_values = np.array([profile[name] for name in conditioning])
        means1 = _conditional_means(d, explanatory, conditioning, rows1, profile_values)
        means0 = _conditional_means(d, explanatory, conditioning, rows0, profile_values)

        def implied_mean(fit, means):
            return fit[INTERCEPT_TERM] \
                + sum(fit[v] * means[v] for v in explanatory) \
                + float(np.dot(profile_values, [fit[name] for name in conditioning]))

        total_gap = implied_mean(fit1, means1) - implied_mean(fit0, means0)
    else:
        profile = {}
        profile_values = np.zeros(0)
        means1 = {v: float(np.mean(d.column(v)[rows1])) for v in explanatory}
        means0 = {v: float(np.mean(d.column(v)[rows0])) for v in explanatory}
        total_gap = float(np.mean(d.column(y)[rows1])) - float(np.mean(d.column(y)[rows0]))

    reference_fit = fit1 if reference == "group1" else fit0
    weight_means = means0 if reference == "group1" else means1

    explained_terms = {
        v: reference_fit[v] * (means1[v] - means0[v]) for v in explanatory
    }
    unexplained_terms = {INTERCEPT_TERM: fit1[INTERCEPT_TERM] - fit0[INTERCEPT_TERM]}
    for v in explanatory:
        unexplained_terms[v] = (fit1[v] - fit0[v]) * weight_means[v]
    for c in conditioning:
        unexplained_terms[c] = (fit1[c] - fit0[c]) * profile[c]

    return OBResult(
        mode="CONDITIONAL" if conditional else "MARGINAL",
        total_gap=total_gap,
        unexplained=sum(unexplained_terms.values()),
        explained=sum(explained_terms.values()),
        unexplained_terms=unexplained_terms,
        explained_terms=explained_terms,
        profile=profile,
        reference=reference,
        models=models,
    )


def _reject_confounder(d: Dataset) -> None:
    if d.role_columns(Role.CONFOUNDER_L):
        raise InvalidSpec(
            "a post-early confounder of the target is declared; the "
            "stratified-regression decomposition cannot absorb it into either "
            "portion — use the confounder-aware plug-in propositions instead"
        )


def _early_profile(d: Dataset, spec: AnalysisSpec, xs, rows) -> dict[str, float]:
    """Early-measure values the within-X decomposition conditions on."""
    explicit = spec.conditioning_value_x
    if explicit is not None:
        if len(xs) != 1:
            raise InvalidSpec(
                "conditioning_value_x is a single number; with several early "
                "columns leave it unset (group-1 means are used)"
            )
        return {xs[0]: float(explicit)}
    group = d.column(d.single_role_column(Role.GROUP))
    rows1 = rows & (group == 1.0)
    return {x: float(np.mean(d.column(x)[rows1])) for x in xs}


def proposition_via_oaxaca(
    d: Dataset, spec: AnalysisSpec, proposition: Proposition | None = None
) -> DecompositionEstimate:
    """Each intervention's residual/reduction read off an explained/unexplained split.

    P1: early measures explain the gap within covariate strata. P2: the
    target explains the gap within (early, covariate) strata, anchored at
    the early profile. P3: early and target explain jointly. P4: only the
    target's detailed explained term counts as reduction; the early
    measures' explained share stays in the residual.
    """
    prop = Proposition(proposition) if proposition is not None else spec.proposition
    bound = spec.resolve(d)
    _reject_confounder(bound)
    y = bound.single_role_column(Role.OUTCOME)
    r = bound.single_role_column(Role.GROUP)
    xs = list(bound.role_columns(Role.EARLY))
    c = list(bound.covariate_names())
    m = bound.single_role_column(Role.TARGET) if bound.role_columns(Role.TARGET) else None
    if prop != Proposition.P1 and m is None:
        raise InvalidSpec(f"{prop.value} requires a target column")
    notes = []

    if prop == Proposition.P1:
        ob = oaxaca_decompose(bound, explanatory=xs, conditioning=c)
        residual, reduction = ob.unexplained, ob.explained
    elif prop == Proposition.P2:
        rows = analysis_rows(bound, [y, r, *xs, *c, m])
        profile = _early_profile(bound, spec, xs, rows)
        profile.update({  # conditioning profile: early at anchor, covariates at group-0 means
            name: float(np.mean(bound.column(name)[rows & (bound.column(r) == 0.0)]))
            for name in c
        })
        ob = oaxaca_decompose(bound, explanatory=[m], conditioning=xs + c, profile=profile)
        residual, reduction = ob.unexplained, ob.explained
        notes.append(f"anchored at early-measure profile {ob.profile}")
        notes.append(P2_ANCHOR_NOTE)
    elif prop == Proposition.P3:
        ob = oaxaca_decompose(bound, explanatory=xs + [m], conditioning=c)
        residual, reduction = ob.unexplained, ob.explained
    elif prop == Proposition.P4:
        ob = oaxaca_decompose(bound, explanatory=xs + [m], conditioning=c)
        reduction = ob.explained_terms[m]
        residual = ob.unexplained + sum(ob.explained_terms[x] for x in xs)
        notes.append(
            "early-measure explained terms are part of the residual: the "
            "intervention equalizes the target marginally and leaves the "
            "early measures' group association intact"
        )
    else:
        raise InvalidSpec(f"{prop.value} has no stratified-regression form")

    initial = residual + reduction
    proportion, extra = proportion_with_note(initial, residual, Scale.ADDITIVE)
    return DecompositionEstimate(
        proposition=prop,
        scale=Scale.ADDITIVE,
        initial=initial,
        residual=residual,
        reduction=reduction,
        proportion_reduced=proportion,
        estimator=f"{spec.estimator.value}+interactions",
        coefficients=ob.models,
        notes=tuple(notes) + extra,
    )


def interaction_model_estimates(
    d: Dataset, spec: AnalysisSpec, proposition: Proposition | None = None
) -> DecompositionEstimate:
    """The same four decompositions from one pooled, group-interacted fit.

    The outcome is regressed on group, the explanatory variables, their
    group interactions, and the covariates; residual/reduction are linear
    combinations of the group main effect, the interaction coefficients, and
    group-specific explanatory means. Mirrors proposition_via_oaxaca exactly
    when no covariates are bound.
    """
    prop = Proposition(proposition) if proposition is not None else spec.proposition
    bound = spec.resolve(d)
    _reject_confounder(bound)
    y = bound.single_role_column(Role.OUTCOME)
    r = bound.single_role_column(Role.GROUP)
    xs = list(bound.role_columns(Role.EARLY))
    c = list(bound.covariate_names())
    m = bound.single_role_column(Role.TARGET) if bound.role_columns(Role.TARGET) else None
    if prop != Proposition.P1 and m is None:
        raise InvalidSpec(f"{prop.value} requires a target column")

    explanatory = xs if prop == Proposition.P1 else xs + [m]
    used = [y, r, *explanatory, *c]
    rows = analysis_rows(bound, used)
    group = bound.column(r)
    rows1 = rows & (group == 1.0)
    rows0 = rows & (group == 0.0)

    interactions = [(r, v) for v in explanatory]
    design = DesignMatrix.from_dataset(bound, [r, *explanatory, *c], rows=rows,
                                       interactions=interactions)
    fit = fit_ols(design, bound.column(y)[rows])
    models = {_model_name(y, [r, *explanatory, *c]
                          + [f"{r}:{v}" for v in explanatory]): fit.as_dict()}

    if c:
        profile_values = np.array([float(np.mean(bound.column(k)[rows0])) for k in c])
        mean1 = _conditional_means(bound, explanatory, c, rows1, profile_values)
        mean0 = _conditional_means(bound, explanatory, c, rows0, profile_values)
    else:
        mean1 = {v: float(np.mean(bound.column(v)[rows1])) for v in explanatory}
        mean0 = {v: float(np.mean(bound.column(v)[rows0])) for v in explanatory}

    def slope(v):
        return fit[v] + fit[f"{r}:{v}"]

    notes = []
    if prop == Proposition.P2:
        anchor = _early_profile(bound, spec, xs, rows)
        # target means conditional on the early anchor (and covariate profile)
        cond = xs + c
        values = np.array([anchor[x] for x in xs]
                          + ([float(np.mean(bound.column(k)[rows0])) for k in c]))
        m1 = _conditional_means(bound, [m], cond, rows1, values)[m]
        m0 = _conditional_means(bound, [m], cond, rows0, values)[m]
        residual = fit[r] + sum(fit[f"{r}:{x}"] * anchor[x] for x in xs) \
            + fit[f"{r}:{m}"] * m0
        reduction = slope(m) * (m1 - m0)
        notes.append(f"anchored at early-measure profile {anchor}")
        notes.append(P2_ANCHOR_NOTE)
    elif prop == Proposition.P1:
        residual = fit[r] + sum(fit[f"{r}:{x}"] * mean0[x] for x in xs)
        reduction = sum(slope(x) * (mean1[x] - mean0[x]) for x in xs)
    elif prop == Proposition.P3:
        residual = fit[r] + sum(fit[f"{r}:{v}"] * mean0[v] for v in explanatory)
        reduction = sum(slope(v) * (mean1[v] - mean0[v]) for v in explanatory)
    elif prop == Proposition.P4:
        residual = fit[r] \
            + sum(fit[x] * (mean1[x] - mean0[x]) for x in xs) \
            + sum(fit[f"{r}:{x}"] * mean1[x] for x in xs) \
            + fit[f"{r}:{m}"] * mean0[m]
        reduction = slope(m) * (mean1[m] - mean0[m])
    else:
        raise InvalidSpec(f"{prop.value} has no pooled-interaction form")

    initial = residual + reduction
    proportion, extra = proportion_with_note(initial, residual, Scale.ADDITIVE)
    return DecompositionEstimate(
        proposition=prop,
        scale=Scale.ADDITIVE,
        initial=initial,
        residual=residual,
        reduction=reduction,
        proportion_reduced=proportion,
        estimator="POOLED_INTERACTION",
        coefficients=models,
        notes=tuple(notes) + extra,
    )
