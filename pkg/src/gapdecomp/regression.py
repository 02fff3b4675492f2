"""Least-squares and logistic fitting on labeled design matrices.

Both fitters are deliberately plain: pivoted QR for the linear algebra, an
unregularized Newton (IRLS) loop for the logistic likelihood. Every
downstream decomposition formula reads named coefficients off the returned
CoefficientSet, so labels — not positions — are the contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.special import expit, logit

from .data import Dataset
from .errors import InvalidSpec, NotConverged, RankDeficient, Separation, UnknownColumn

INTERCEPT = "intercept"

_RANK_TOL = 1e-10
_MAX_ITER = 100
_COEF_TOL = 1e-10
_DEVIANCE_TOL = 1e-12
_DIVERGENCE_NORM = 1e3


@dataclass(frozen=True)
class DesignMatrix:
    """Dense design with unique column labels; first column is the intercept."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "labels", tuple(self.labels))
        if mat.ndim != 2 or mat.shape[1] != len(self.labels):
            raise UnknownColumn("design shape does not match its labels")
        if len(set(self.labels)) != len(self.labels):
            raise UnknownColumn("duplicate design column labels")
        if self.labels[0] != INTERCEPT or not np.all(mat[:, 0] == 1.0):
            raise UnknownColumn("first design column must be an all-ones intercept")

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_dataset(
        cls,
        d: Dataset,
        columns: Sequence[str],
        rows: np.ndarray | None = None,
        interactions: Sequence[tuple[str, str]] = (),
    ) -> "DesignMatrix":
        """Build [1, columns..., a·b interactions...] from dataset columns.

        Interaction columns are labeled "a:b". `rows` is an optional boolean
        mask or index array selecting the analysis rows.
        """
        cols = {name: d.column(name) for name in columns}
        if rows is not None:
            cols = {k: v[rows] for k, v in cols.items()}
        n = next(iter(cols.values())).shape[0] if cols else d.n_rows
        labels = [INTERCEPT, *cols]
        arrays = [np.ones(n), *cols.values()]
        for a, b in interactions:
            left = cols[a] if a in cols else (d.column(a) if rows is None else d.column(a)[rows])
            right = cols[b] if b in cols else (d.column(b) if rows is None else d.column(b)[rows])
            labels.append(f"{a}:{b}")
            arrays.append(left * right)
        return cls(tuple(labels), np.column_stack(arrays))


@dataclass(frozen=True)
class CoefficientSet:
    """Named coefficients from one fit plus fit diagnostics."""

    labels: tuple[str, ...]
    values: np.ndarray
    residual_variance: float | None = None
    deviance: float | None = None
    n_iter: int | None = None
    converged: bool = True
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {l: i for i, l in enumerate(self.labels)})

    def __getitem__(self, label: str) -> float:
        try:
            return float(self.values[self._index[label]])
        except KeyError:
            raise UnknownColumn(f"no coefficient labeled {label!r}") from None

    def as_dict(self) -> dict[str, float]:
        return {l: float(v) for l, v in zip(self.labels, self.values)}


def _solve_full_rank(mat: np.ndarray, rhs: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Least-squares solve via pivoted QR; raises RankDeficient with names."""
    q, r, piv = qr(mat, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = _RANK_TOL * (diag.max() if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < mat.shape[1]:
        raise RankDeficient([labels[j] for j in piv[rank:]])
    solution = solve_triangular(r, q.T @ rhs)
    out = np.empty_like(solution)
    out[piv] = solution
    return out


def fit_ols(design: DesignMatrix, y: np.ndarray) -> CoefficientSet:
    """Ordinary least squares.

    Raises RankDeficient when the design is singular (names the pivoted-out
    columns). Residual variance uses the n - k denominator.
    """
    y = np.asarray(y, dtype=float)
    n, k = design.matrix.shape
    if n <= k:
        raise RankDeficient(design.labels)
    beta = _solve_full_rank(design.matrix, y, design.labels)
    resid = y - design.matrix @ beta
    return CoefficientSet(
        design.labels, beta, residual_variance=float(resid @ resid) / (n - k)
    )


def _binomial_deviance(eta: np.ndarray, y: np.ndarray) -> float:
    # -2 log-likelihood, written with logaddexp so extreme eta stays finite
    return float(2.0 * np.sum(y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta)))


def fit_logistic(design: DesignMatrix, y: np.ndarray) -> CoefficientSet:
    """Maximum-likelihood logistic regression by Newton/IRLS.

    Starts from the zero vector with intercept = logit of the outcome mean.
    Converges when the max absolute coefficient change is < 1e-10 or the
    deviance changes by < 1e-12; at most 100 iterations.

    Raises
    ------
    Separation
        No finite maximizer: either the coefficient sup-norm exceeded 1e3
        while step sizes stopped shrinking, or the norm grew monotonically
        for 40 straight iterations. Newton iterates are scale-equivariant,
        so a fit with a finite optimum reaches it (and stops growing) in
        far fewer steps regardless of column scaling; only a likelihood
        increasing along a ray keeps the norm growing indefinitely.
    NotConverged, RankDeficient
    """
    y = np.asarray(y, dtype=float)
    n, k = design.matrix.shape
    if n <= k:
        raise RankDeficient(design.labels)
    classes = np.unique(y)
    if not np.array_equal(classes, [0.0, 1.0]):
        raise InvalidSpec("logistic outcome must contain both 0s and 1s (only)")

    mat = design.matrix
    beta = np.zeros(k)
    beta[0] = logit(y.mean())
    deviance = _binomial_deviance(mat @ beta, y)
    previous_step = np.inf
    previous_norm = float(np.max(np.abs(beta)))
    divergence_run = 0

    for iteration in range(1, _MAX_ITER + 1):
        eta = mat @ beta
        p = expit(eta)
        w = np.clip(p * (1.0 - p), 1e-12, None)
        root_w = np.sqrt(w)
        delta = _solve_full_rank(
            mat * root_w[:, None], (y - p) / root_w, design.labels
        )
        beta = beta + delta
        step = float(np.max(np.abs(delta)))
        new_deviance = _binomial_deviance(mat @ beta, y)
        norm = float(np.max(np.abs(beta)))
        if norm > _DIVERGENCE_NORM and step >= previous_step:
            raise Separation(
                "logistic fit diverging (coefficient norm "
                f"{norm:.3g} after {iteration} iterations)"
            )
        if norm > previous_norm:
            divergence_run += 1
            if divergence_run >= 40:
                raise Separation(
                    "logistic fit diverging (coefficient norm grew for "
                    f"{divergence_run} straight iterations, reaching "
                    f"{norm:.3g}; the likelihood has no finite maximizer)"
                )
        else:
            divergence_run = 0
        previous_norm = norm
        if step < _COEF_TOL or abs(deviance - new_deviance) < _DEVIANCE_TOL:
            return CoefficientSet(
                design.labels, beta, deviance=new_deviance,
                n_iter=iteration, converged=True,
            )
        deviance = new_deviance
        previous_step = step

    raise NotConverged(f"logistic fit did not converge in {_MAX_ITER} iterations")
