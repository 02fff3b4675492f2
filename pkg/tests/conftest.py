"""Shared builders for the test suite."""

import numpy as np

from gapdecomp import Dataset, StructuralParams


def dataset_from(columns, roles):
    return Dataset({k: np.asarray(v, dtype=float) for k, v in columns.items()}, roles)


def signed(rng, lo, hi):
    return float(rng.uniform(lo, hi) * rng.choice([-1.0, 1.0]))


def random_continuous_params(rng):
    """Structural coefficients with every pathway active and mixed signs."""
    return StructuralParams(
        group_share=float(rng.uniform(0.25, 0.75)),
        x_intercept=signed(rng, 0.0, 0.5),
        x_group_effect=signed(rng, 0.2, 0.8),
        x_noise_sd=float(rng.uniform(0.6, 1.4)),
        m_intercept=signed(rng, 0.0, 0.5),
        m_group_effect=signed(rng, 0.2, 0.8),
        m_early_effect=signed(rng, 0.2, 0.8),
        m_noise_sd=float(rng.uniform(0.6, 1.4)),
        y_intercept=signed(rng, 0.0, 0.5),
        y_group_effect=signed(rng, 0.2, 0.8),
        y_early_effect=signed(rng, 0.2, 0.8),
        y_target_effect=signed(rng, 0.2, 0.8),
        y_noise_sd=float(rng.uniform(0.6, 1.4)),
    )


def random_discrete_params(rng):
    """Bernoulli early/target; coefficients kept small so cell means stay
    inside (0, 1) for every (group, early) combination."""
    return StructuralParams(
        group_share=float(rng.uniform(0.3, 0.7)),
        x_intercept=float(rng.uniform(0.3, 0.5)),
        x_group_effect=float(rng.uniform(0.05, 0.25)),
        m_intercept=float(rng.uniform(0.25, 0.4)),
        m_group_effect=float(rng.uniform(0.05, 0.2)),
        m_early_effect=float(rng.uniform(0.05, 0.25)),
        y_intercept=signed(rng, 0.0, 0.5),
        y_group_effect=signed(rng, 0.2, 0.8),
        y_early_effect=signed(rng, 0.2, 0.8),
        y_target_effect=signed(rng, 0.2, 0.8),
        y_noise_sd=float(rng.uniform(0.6, 1.4)),
        discrete=True,
    )


def random_rare_binary_params(rng, prevalence=0.05):
    return StructuralParams(
        group_share=float(rng.uniform(0.35, 0.65)),
        x_group_effect=signed(rng, 0.2, 0.5),
        m_group_effect=signed(rng, 0.1, 0.4),
        m_early_effect=signed(rng, 0.1, 0.4),
        y_group_effect=signed(rng, 0.1, 0.4),
        y_early_effect=signed(rng, 0.1, 0.3),
        y_target_effect=signed(rng, 0.1, 0.3),
        binary_outcome=True,
        outcome_prevalence=prevalence,
    )
