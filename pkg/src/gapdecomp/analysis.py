"""Shared vocabulary: propositions, estimator families, run specs, estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .data import Dataset, Role, normalize_roles
from .errors import InvalidSpec


class Proposition(str, Enum):
    """Which distribution-equalizing intervention is being evaluated.

    P1 equalizes the early measures X; P2 equalizes the target M within
    levels of X; P3 equalizes X and M jointly; P4 equalizes M marginally.
    P5/P6/P7 are P2/P3/P4 in the presence of a post-X confounder of the
    target-outcome relation, handled by the plug-in estimator only.
    """

    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"
    P6 = "P6"
    P7 = "P7"


TIMEDEP_PROPOSITIONS = (Proposition.P5, Proposition.P6, Proposition.P7)

#: Which plain proposition each confounder-aware one collapses to.
TIMEDEP_BASE = {
    Proposition.P5: Proposition.P2,
    Proposition.P6: Proposition.P3,
    Proposition.P7: Proposition.P4,
}


class Estimator(str, Enum):
    SUCCESSIVE = "SUCCESSIVE"  # nested regressions, coefficient differences
    PRODUCT = "PRODUCT"        # outcome/target/early models, coefficient products
    PLUGIN = "PLUGIN"          # nonparametric standardization over strata


class OutcomeFamily(str, Enum):
    CONTINUOUS = "CONTINUOUS"
    RARE_BINARY = "RARE_BINARY"


class Scale(str, Enum):
    ADDITIVE = "ADDITIVE"  # initial = residual + reduction
    RATIO = "RATIO"        # initial = residual * reduction


#: Attached to every within-X estimate: its reported starting point is the
#: early-measure-conditional gap, which differs from the marginal gap the
#: other propositions start from.
P2_ANCHOR_NOTE = (
    "initial disparity for this proposition is anchored at the early-measure-"
    "conditional gap, not the marginal gap"
)


@dataclass(frozen=True)
class AnalysisSpec:
    """Declarative description of one decomposition run.

    Parameters
    ----------
    proposition, estimator, outcome_family :
        What to estimate and with which family.
    bindings :
        Optional role -> column-name overrides; when None the dataset's own
        role map is used.
    conditioning_value_x :
        The early-measure value at which the within-X propositions (P2/P5)
        are anchored. Defaults to the group-1 mean of X (parametric paths)
        or the stratum closest to it (plug-in path).
    options :
        Free-form knobs: "max_levels" (plug-in, default 20),
        "aggregation_weight" ("group1"/"group0"/"pooled", default "group1"),
        "mean_model" ("cells"/"ols", plug-in cell-mean source),
        "interactions" (bool, route P1-P4 through the group-stratified
        decomposition instead of the pooled no-interaction formulas).
    """

    proposition: Proposition
    estimator: Estimator
    outcome_family: OutcomeFamily = OutcomeFamily.CONTINUOUS
    bindings: Mapping | None = None
    conditioning_value_x: float | None = None
    options: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "proposition", Proposition(self.proposition))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "outcome_family", OutcomeFamily(self.outcome_family))

    def option(self, key: str, default=None):
        return self.options.get(key, default)

    def resolve(self, d: Dataset) -> Dataset:
        """Dataset with this spec's bindings applied, after validation.

        Bindings are merged over the dataset's own role map: a role named in
        the spec replaces that role's columns, all other roles carry over.
        """
        if self.bindings:
            merged = {role: names for role, names in d.roles.items()}
            merged.update(normalize_roles(self.bindings))
            bound = d.with_roles(merged)
        else:
            bound = d
        validate_spec(self, bound)
        return bound


def validate_spec(spec: AnalysisSpec, d: Dataset) -> None:
    """Check the structural constraints a run must satisfy before any math.

    Raises InvalidSpec naming the violated constraint.
    """
    for role in (Role.OUTCOME, Role.GROUP):
        if not d.role_columns(role):
            raise InvalidSpec(f"spec requires a bound {role.value} column")
    if not d.role_columns(Role.EARLY):
        raise InvalidSpec("spec requires at least one early-measure column")
    needs_target = not (
        spec.proposition == Proposition.P1 and spec.estimator != Estimator.PRODUCT
    )
    if needs_target and not d.role_columns(Role.TARGET):
        raise InvalidSpec(f"{spec.proposition.value} requires a bound target column")
    if spec.proposition in TIMEDEP_PROPOSITIONS:
        if spec.estimator != Estimator.PLUGIN:
            raise InvalidSpec(
                f"{spec.proposition.value} is only identified by the PLUGIN "
                f"estimator, got {spec.estimator.value}"
            )
        if not d.role_columns(Role.CONFOUNDER_L):
            raise InvalidSpec(f"{spec.proposition.value} requires a confounder binding")
    if spec.estimator == Estimator.PRODUCT:
        if len(d.role_columns(Role.EARLY)) != 1 or len(d.role_columns(Role.TARGET)) != 1:
            raise InvalidSpec(
                "PRODUCT estimator requires exactly one early column and one target column"
            )


@dataclass(frozen=True)
class DecompositionEstimate:
    """One proposition's answer: where the disparity starts and what remains.

    On the ADDITIVE scale initial = residual + reduction; on the RATIO scale
    initial = residual * reduction. `proportion_reduced` is None (with a note)
    when the initial disparity is too close to null for the ratio to mean
    anything. `coefficients` snapshots the fitted models the estimate was read
    from (parametric families only).
    """

    proposition: Proposition
    scale: Scale
    initial: float
    residual: float
    reduction: float
    proportion_reduced: float | None
    estimator: str
    coefficients: Mapping[str, Mapping[str, float]] | None = None
    notes: tuple[str, ...] = ()

    def with_notes(self, *extra: str) -> "DecompositionEstimate":
        return DecompositionEstimate(
            self.proposition, self.scale, self.initial, self.residual,
            self.reduction, self.proportion_reduced, self.estimator,
            self.coefficients, self.notes + tuple(extra),
        )
