import dataclasses

import numpy as np
import pytest

from gapdecomp import (
    AnalysisSpec,
    Role,
    StructuralParams,
    estimate,
    generate,
    true_values,
)
from gapdecomp.analysis import P2_ANCHOR_NOTE
from gapdecomp.errors import InvalidSpec, UnsupportedMode


BASE = StructuralParams(
    group_share=0.4,
    x_intercept=0.5, x_group_effect=0.6,
    m_intercept=-0.2, m_group_effect=0.5, m_early_effect=0.4,
    y_intercept=1.0, y_group_effect=0.3, y_early_effect=0.5, y_target_effect=0.7,
)


def test_parameter_validation():
    with pytest.raises(InvalidSpec):
        StructuralParams(group_share=0.0)
    with pytest.raises(InvalidSpec):
        StructuralParams(group_share=1.0)
    with pytest.raises(InvalidSpec):
        StructuralParams(x_noise_sd=-0.1)
    with pytest.raises(InvalidSpec):
        StructuralParams(binary_outcome=True)  # needs a prevalence
    with pytest.raises(InvalidSpec):
        StructuralParams(binary_outcome=True, outcome_prevalence=1.5)
    with pytest.raises(InvalidSpec):
        StructuralParams(covariate_share=0.0)
    for name in ("x_group_effect", "m_early_effect", "y_target_effect", "discrete"):
        assert name in StructuralParams.field_names()


def test_generation_is_deterministic_in_the_seed():
    a = generate(BASE, 500, seed=3)
    b = generate(BASE, 500, seed=3)
    c = generate(BASE, 500, seed=4)
    assert set(a.columns) == {"outcome", "group", "early", "target"}
    assert a.n_rows == 500
    for name in a.columns:
        assert np.array_equal(a.column(name), b.column(name))
    assert not np.array_equal(a.column("outcome"), c.column("outcome"))
    assert a.single_role_column(Role.OUTCOME) == "outcome"
    assert a.role_columns(Role.EARLY) == ("early",)


def test_generation_needs_at_least_one_row():
    with pytest.raises(InvalidSpec):
        generate(BASE, 0)


def test_noise_free_draws_follow_the_structural_equations():
    p = dataclasses.replace(BASE, x_noise_sd=0.0, m_noise_sd=0.0, y_noise_sd=0.0)
    d = generate(p, 200, seed=5)
    group = d.column("group")
    early = p.x_intercept + p.x_group_effect * group
    target = p.m_intercept + p.m_group_effect * group + p.m_early_effect * early
    shift = p.y_group_effect * group + p.y_early_effect * early + p.y_target_effect * target
    assert np.array_equal(d.column("early"), early)
    assert np.array_equal(d.column("target"), target)
    assert np.array_equal(d.column("outcome"), p.y_intercept + shift)


def test_group_moments_track_the_coefficients():
    d = generate(BASE, 40000, seed=6)
    g = d.column("group")
    gap = float(d.column("early")[g == 1.0].mean() - d.column("early")[g == 0.0].mean())
    assert gap == pytest.approx(BASE.x_group_effect, abs=0.04)
    flat = generate(dataclasses.replace(BASE, x_group_effect=0.0), 40000, seed=7)
    g = flat.column("group")
    gap = float(flat.column("early")[g == 1.0].mean() - flat.column("early")[g == 0.0].mean())
    assert gap == pytest.approx(0.0, abs=0.04)


def test_closed_form_decomposition_with_unit_coefficients():
    p = StructuralParams(
        x_group_effect=1.0,
        m_group_effect=1.0, m_early_effect=1.0,
        y_group_effect=1.0, y_early_effect=1.0, y_target_effect=1.0,
    )
    expected = {
        "P1": (2.0, 2.0),
        "P2": (1.0, 1.0),
        "P3": (1.0, 3.0),
        "P4": (2.0, 2.0),
    }
    for prop, (residual, reduction) in expected.items():
        t = true_values(p, prop)
        assert t.residual == residual, prop
        assert t.reduction == reduction, prop
        assert t.initial == residual + reduction
        assert t.proportion_reduced == reduction / (residual + reduction)
        assert t.estimator == "TRUTH"
    assert P2_ANCHOR_NOTE in true_values(p, "P2").notes
    # interventions on the marginal gap share one starting disparity
    assert true_values(p, "P1").initial == true_values(p, "P3").initial
    assert true_values(p, "P3").initial == true_values(p, "P4").initial


def test_truths_vanish_when_the_pathway_is_absent():
    no_target_path = dataclasses.replace(BASE, m_group_effect=0.0, m_early_effect=0.0)
    assert true_values(no_target_path, "P4").reduction == 0.0
    no_outcome_loadings = dataclasses.replace(
        BASE, y_early_effect=0.0, y_target_effect=0.0
    )
    for prop in ("P1", "P2", "P3", "P4"):
        t = true_values(no_outcome_loadings, prop)
        assert t.reduction == 0.0, prop
        assert t.residual == BASE.y_group_effect, prop


def test_truths_refuse_modes_without_closed_forms():
    with pytest.raises(UnsupportedMode):
        true_values(dataclasses.replace(BASE, confounder=True, m_confounder_effect=0.3), "P1")
    with pytest.raises(UnsupportedMode):
        true_values(
            dataclasses.replace(BASE, binary_outcome=True, outcome_prevalence=0.05), "P1"
        )
    with pytest.raises(UnsupportedMode):
        true_values(BASE, "P5")


def test_estimates_recover_the_truth_on_large_samples():
    d = generate(BASE, 60000, seed=8)
    for prop in ("P1", "P2", "P3", "P4"):
        t = true_values(BASE, prop)
        e = estimate(d, AnalysisSpec(prop, "SUCCESSIVE"))
        assert e.residual == pytest.approx(t.residual, abs=0.035), prop
        assert e.reduction == pytest.approx(t.reduction, abs=0.035), prop


def test_discrete_mode_draws_binary_mediators_with_the_same_truths():
    p = StructuralParams(
        x_intercept=0.4, x_group_effect=0.2,
        m_intercept=0.3, m_group_effect=0.15, m_early_effect=0.2,
        y_group_effect=0.3, y_early_effect=0.5, y_target_effect=0.7,
        discrete=True,
    )
    d = generate(p, 60000, seed=9)
    assert set(np.unique(d.column("early"))) <= {0.0, 1.0}
    assert set(np.unique(d.column("target"))) <= {0.0, 1.0}
    t = true_values(p, "P4")
    e = estimate(d, AnalysisSpec("P4", "PLUGIN"))
    assert e.residual == pytest.approx(t.residual, abs=0.035)
    assert e.reduction == pytest.approx(t.reduction, abs=0.035)


def test_discrete_mode_rejects_infeasible_success_probabilities():
    p = StructuralParams(x_intercept=0.9, x_group_effect=0.5, discrete=True)
    with pytest.raises(InvalidSpec) as err:
        generate(p, 100, seed=10)
    assert "shrink the coefficients" in str(err.value)


def test_binary_outcome_mode_hits_the_requested_prevalence():
    p = dataclasses.replace(BASE, binary_outcome=True, outcome_prevalence=0.05)
    d = generate(p, 80000, seed=11)
    y = d.column("outcome")
    assert set(np.unique(y)) <= {0.0, 1.0}
    assert float(y.mean()) == pytest.approx(0.05, abs=0.01)


def test_optional_confounder_and_covariate_columns():
    p = dataclasses.replace(
        BASE,
        confounder=True, l_intercept=0.1, l_group_effect=0.2, l_early_effect=0.3,
        m_confounder_effect=0.4, y_confounder_effect=0.5,
        covariate_share=0.3, x_covariate_effect=0.1, y_covariate_effect=0.2,
    )
    d = generate(p, 300, seed=12)
    assert set(d.columns) == {
        "outcome", "group", "early", "target", "confounder", "covariate"
    }
    assert d.single_role_column(Role.CONFOUNDER_L) == "confounder"
    assert d.covariate_names() == ("covariate",)
    assert set(np.unique(d.column("covariate"))) <= {0.0, 1.0}
