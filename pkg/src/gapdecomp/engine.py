"""Single entry point mapping an AnalysisSpec to the right estimator."""

from __future__ import annotations

from .analysis import AnalysisSpec, DecompositionEstimate, Estimator
from .data import Dataset
from .oaxaca import proposition_via_oaxaca
from .parametric import decompose_product_coefficients, decompose_successive_linear
from .plugin import plugin_mu


def estimate(d: Dataset, spec: AnalysisSpec) -> DecompositionEstimate:
    """Run one decomposition as described by the spec.

    PLUGIN handles the confounder-aware propositions as well as P1-P4;
    the parametric families route rare-binary outcomes to the ratio-scale
    fits, and the "interactions" option redirects to the group-stratified
    (explained/unexplained) formulas.
    """
    if spec.estimator == Estimator.PLUGIN:
        return plugin_mu(d, spec)
    if spec.option("interactions"):
        return proposition_via_oaxaca(d, spec)
    if spec.estimator == Estimator.PRODUCT:
        return decompose_product_coefficients(d, spec)
    return decompose_successive_linear(d, spec)
