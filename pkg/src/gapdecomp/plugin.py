"""Plug-in standardization over discrete strata (the nonparametric family).

Every proposition is a weighted sum of group-1 conditional outcome means,
with weights taken from whichever group's distribution the intervention
equalizes. The same loop drives the plain propositions (P1-P4) and their
confounder-aware versions (P5-P7): when no confounder is in play the inner
confounder sum runs over a single pseudo-level with probability exactly 1.0,
so a dataset whose confounder is constant collapses to the plain answer
bit-for-bit.

Continuous early/target columns must be discretized first (see
``data.quantile_bin``); strata are never dropped silently — a needed cell
with no observations raises EmptyStratum naming the cell.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .analysis import (
    P2_ANCHOR_NOTE,
    AnalysisSpec,
    DecompositionEstimate,
    OutcomeFamily,
    Proposition,
    Scale,
    TIMEDEP_BASE,
    TIMEDEP_PROPOSITIONS,
)
from .data import Dataset, Role
from .errors import EmptyStratum, InvalidSpec, TooManyLevels
from .inference import proportion_with_note
from .regression import DesignMatrix, fit_ols

DEFAULT_MAX_LEVELS = 20

_AGGREGATION_CHOICES = ("group1", "group0", "pooled")


def _joint_levels(arrays: Sequence[np.ndarray], n: int):
    """Sorted observed value-tuples and a mask per tuple; [()] if no columns."""
    if not arrays:
        return [()], {(): np.ones(n, dtype=bool)}
    rows = list(zip(*(a.tolist() for a in arrays)))
    levels = sorted(set(rows))
    masks = {}
    for level in levels:
        mask = np.ones(n, dtype=bool)
        for array, value in zip(arrays, level):
            mask &= array == value
        masks[level] = mask
    return levels, masks


class StratumTable:
    """Counts and outcome means over the discrete strata of one analysis sample.

    Dimensions: "early" (joint tuple over the early columns), "target",
    "confounder", "covariate" (joint tuple). A dimension with no bound
    columns behaves as a single all-rows pseudo-level, which is what makes
    the confounder-free and confounder-aware code paths literally the same
    loop.
    """

    def __init__(self, d: Dataset, rows: np.ndarray, max_levels: int = DEFAULT_MAX_LEVELS,
                 outcome_values: np.ndarray | None = None):
        y_col = d.single_role_column(Role.OUTCOME)
        r_col = d.single_role_column(Role.GROUP)
        self.outcome = (d.column(y_col) if outcome_values is None else outcome_values)[rows]
        group = d.column(r_col)[rows]
        n = self.outcome.shape[0]
        self._group_masks = {0.0: group == 0.0, 1.0: group == 1.0}

        self.columns: dict[str, tuple[str, ...]] = {
            "early": d.role_columns(Role.EARLY),
            "target": d.role_columns(Role.TARGET),
            "confounder": d.role_columns(Role.CONFOUNDER_L),
            "covariate": d.covariate_names(),
        }
        self.levels: dict[str, list] = {}
        self._masks: dict[str, dict] = {}
        for dim, names in self.columns.items():
            arrays = [d.column(name)[rows] for name in names]
            for name, array in zip(names, arrays):
                distinct = np.unique(array).size
                if distinct > max_levels:
                    raise TooManyLevels(
                        f"column {name!r} has {distinct} levels, more than the "
                        f"allowed {max_levels}; discretize it first"
                    )
            self.levels[dim], self._masks[dim] = _joint_levels(arrays, n)

    def _describe(self, group, pairs) -> str:
        parts = [f"group={int(group)}" if group is not None else "group=any"]
        for dim, level in pairs:
            if self.columns[dim]:
                parts.append(f"{dim} {self.columns[dim]}={level}")
        return ", ".join(parts)

    def cell_mask(self, group, pairs=()) -> np.ndarray:
        mask = np.ones(self.outcome.shape[0], dtype=bool) if group is None \
            else self._group_masks[float(group)]
        for dim, level in pairs:
            mask = mask & self._masks[dim][level]
        return mask

    def count(self, group, pairs=()) -> int:
        return int(self.cell_mask(group, pairs).sum())

    def mean(self, group, pairs=()) -> float:
        mask = self.cell_mask(group, pairs)
        if not mask.any():
            raise EmptyStratum(self._describe(group, pairs))
        return float(np.mean(self.outcome[mask]))

    def probability(self, dim: str, level, group, given=()) -> float:
        """P(dim = level | group, given cells), from raw counts."""
        base = self.cell_mask(group, given)
        denominator = int(base.sum())
        if denominator == 0:
            raise EmptyStratum(self._describe(group, given))
        return int((base & self._masks[dim][level]).sum()) / denominator


def _saturated_fitted_values(d: Dataset, rows: np.ndarray) -> np.ndarray:
    """Per-row predictions of a fully saturated least-squares fit.

    One indicator per observed (group, early, target, confounder, covariate)
    cell; with that design the fitted values equal the cell means up to
    solver precision, which is exactly what "saturated parametric" buys.
    """
    names = [d.single_role_column(Role.GROUP)]
    for role in (Role.EARLY, Role.TARGET, Role.CONFOUNDER_L):
        names.extend(d.role_columns(role))
    names.extend(d.covariate_names())
    arrays = [d.column(name)[rows] for name in names]
    keys = list(zip(*(a.tolist() for a in arrays)))
    cells = sorted(set(keys))
    index = {cell: j for j, cell in enumerate(cells)}
    codes = np.fromiter((index[k] for k in keys), count=len(keys), dtype=int)
    design = np.ones((len(keys), len(cells)))
    for j in range(1, len(cells)):  # cell 0 is the reference level
        design[:, j] = codes == j
    labels = ("intercept",) + tuple(f"cell_{j}" for j in range(1, len(cells)))
    matrix = DesignMatrix(labels, design)
    y = d.column(d.single_role_column(Role.OUTCOME))[rows]
    beta = fit_ols(matrix, y)
    return design @ beta.values


def _strip_roles(d: Dataset, prop: Proposition) -> Dataset:
    # Hide the confounder from the plain propositions so their stratum table
    # runs the pseudo-level path, and drop the target for P1 (not needed, and
    # a continuous target must not trip the level limit there).
    roles = {role.value: names for role, names in d.roles.items()}
    if prop not in TIMEDEP_PROPOSITIONS:
        roles.pop(Role.CONFOUNDER_L.value, None)
    if prop == Proposition.P1:
        roles.pop(Role.TARGET.value, None)
    return d.with_roles(roles)


def _choose_x_star(table: StratumTable, spec: AnalysisSpec, d: Dataset, rows) -> tuple:
    """The early-measure stratum the within-X propositions condition on."""
    levels = table.levels["early"]
    early_names = table.columns["early"]
    explicit = spec.conditioning_value_x
    if explicit is not None:
        if len(early_names) != 1:
            raise InvalidSpec(
                "conditioning_value_x is a single number; with several early "
                "columns leave it unset and the stratum nearest the group-1 "
                "mean is used"
            )
        target = np.array([float(explicit)])
    else:
        group = d.column(d.single_role_column(Role.GROUP))[rows]
        target = np.array([
            float(np.mean(d.column(name)[rows][group == 1.0])) for name in early_names
        ])
    distances = [float(np.sum((np.asarray(level) - target) ** 2)) for level in levels]
    return levels[int(np.argmin(distances))]


def _standardized_mean(table: StratumTable, prop: Proposition, c_level, x_star) -> float:
    """One covariate-stratum's equalized mean, per the proposition's formula."""
    c = ("covariate", c_level)
    base = TIMEDEP_BASE.get(prop, prop)

    def averaged_outcome(x_level, m_level):
        # Group-1 outcome mean at (early, target, covariate), averaged over the
        # group-1 confounder distribution within (early, covariate). Without a
        # bound confounder this is a single pass with probability exactly 1.0.
        value = 0.0
        for l_level in table.levels["confounder"]:
            p_l = table.probability("confounder", l_level, 1.0, (("early", x_level), c))
            if p_l == 0.0:
                continue
            value += p_l * table.mean(
                1.0,
                (("early", x_level), ("target", m_level), ("confounder", l_level), c),
            )
        return value

    def target_sum(x_level, target_given):
        # Sum over target levels of P(target | group 0, target_given) times the
        # confounder-averaged group-1 outcome mean at (x_level, target).
        total = 0.0
        for m_level in table.levels["target"]:
            p_m = table.probability("target", m_level, 0.0, target_given)
            if p_m == 0.0:
                continue
            total += p_m * averaged_outcome(x_level, m_level)
        return total

    if base == Proposition.P1:
        total = 0.0
        for x_level in table.levels["early"]:
            p_x = table.probability("early", x_level, 0.0, (c,))
            if p_x == 0.0:
                continue
            total += p_x * table.mean(1.0, (("early", x_level), c))
        return total
    if base == Proposition.P2:
        return target_sum(x_star, (("early", x_star), c))
    if base == Proposition.P3:
        total = 0.0
        for x_level in table.levels["early"]:
            p_x = table.probability("early", x_level, 0.0, (c,))
            if p_x == 0.0:
                continue
            total += p_x * target_sum(x_level, (("early", x_level), c))
        return total
    if base == Proposition.P4:
        total = 0.0
        for x_level in table.levels["early"]:
            p_x = table.probability("early", x_level, 1.0, (c,))
            if p_x == 0.0:
                continue
            total += p_x * target_sum(x_level, (c,))
        return total
    raise InvalidSpec(f"{prop.value} has no plug-in form")


def plugin_mu(
    d: Dataset, spec: AnalysisSpec, proposition: Proposition | None = None
) -> DecompositionEstimate:
    """Plug-in decomposition for the plain propositions (P1-P4).

    Residual is (equalized mean) - (group-0 mean); reduction is (group-1
    mean) - (equalized mean); covariate strata are averaged with the chosen
    aggregation weight (group-1 distribution by default). With outcome
    family RARE_BINARY the same three means are reported as ratios.
    """
    prop = Proposition(proposition) if proposition is not None else spec.proposition
    return _plugin_estimate(d, spec, prop)


def plugin_mu_timedep(
    d: Dataset, spec: AnalysisSpec, proposition: Proposition | None = None
) -> DecompositionEstimate:
    """Plug-in decomposition with a post-early confounder of the target (P5-P7).

    The confounder's distribution is always taken from group 1 within
    (early, covariate) cells — the intervention equalizes the target, not
    the confounder — while target/early weights come from group 0 exactly as
    in the corresponding plain proposition.
    """
    prop = Proposition(proposition) if proposition is not None else spec.proposition
    if prop not in TIMEDEP_PROPOSITIONS:
        raise InvalidSpec(f"{prop.value} is not a confounder-aware proposition")
    return _plugin_estimate(d, spec, prop)


def _plugin_estimate(d: Dataset, spec: AnalysisSpec, prop: Proposition) -> DecompositionEstimate:
    bound = spec.resolve(d)
    if prop in TIMEDEP_PROPOSITIONS and not bound.role_columns(Role.CONFOUNDER_L):
        raise InvalidSpec(f"{prop.value} requires a confounder binding")
    stripped = _strip_roles(bound, prop)

    used = [stripped.single_role_column(Role.OUTCOME), stripped.single_role_column(Role.GROUP)]
    for role in (Role.EARLY, Role.TARGET, Role.CONFOUNDER_L):
        used += list(stripped.role_columns(role))
    used += list(stripped.covariate_names())
    mask = np.ones(stripped.n_rows, dtype=bool)
    for name in used:
        mask &= ~np.isnan(stripped.column(name))
    rows = np.flatnonzero(mask)

    max_levels = int(spec.option("max_levels", DEFAULT_MAX_LEVELS))
    mean_model = spec.option("mean_model", "cells")
    notes = []
    outcome_values = None
    if mean_model == "ols":
        fitted = np.full(stripped.n_rows, np.nan)
        fitted[rows] = _saturated_fitted_values(stripped, rows)
        outcome_values = fitted
        notes.append("cell means taken from a saturated least-squares fit")
    elif mean_model != "cells":
        raise InvalidSpec(f"unknown mean_model {mean_model!r}")

    table = StratumTable(stripped, rows, max_levels=max_levels, outcome_values=outcome_values)

    base = TIMEDEP_BASE.get(prop, prop)
    x_star = None
    anchor = ()
    if base == Proposition.P2:
        x_star = _choose_x_star(table, spec, stripped, rows)
        anchor = (("early", x_star),)
        notes.append(f"anchored at early-measure stratum {x_star}")

    weight_mode = spec.option("aggregation_weight", "group1")
    if weight_mode not in _AGGREGATION_CHOICES:
        raise InvalidSpec(f"aggregation_weight must be one of {_AGGREGATION_CHOICES}")
    notes.append(f"covariate strata aggregated with {weight_mode} weights")
    weight_group = {"group1": 1.0, "group0": 0.0, "pooled": None}[weight_mode]

    mu = 0.0
    group0_mean = 0.0
    group1_mean = 0.0
    for c_level in table.levels["covariate"]:
        weight = table.probability("covariate", c_level, weight_group)
        if weight == 0.0:
            continue
        pairs = (("covariate", c_level),) + anchor
        mu += weight * _standardized_mean(table, prop, c_level, x_star)
        group0_mean += weight * table.mean(0.0, pairs)
        group1_mean += weight * table.mean(1.0, pairs)

    if spec.outcome_family == OutcomeFamily.RARE_BINARY:
        scale = Scale.RATIO
        initial = group1_mean / group0_mean
        residual = mu / group0_mean
        reduction = group1_mean / mu
    else:
        scale = Scale.ADDITIVE
        initial = group1_mean - group0_mean
        residual = mu - group0_mean
        reduction = group1_mean - mu
    proportion, extra = proportion_with_note(initial, residual, scale)
    if base == Proposition.P2:
        notes.append(P2_ANCHOR_NOTE)
    return DecompositionEstimate(
        proposition=prop,
        scale=scale,
        initial=initial,
        residual=residual,
        reduction=reduction,
        proportion_reduced=proportion,
        estimator=spec.estimator.value,
        coefficients=None,
        notes=tuple(notes) + extra,
    )
