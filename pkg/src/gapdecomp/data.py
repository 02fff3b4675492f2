"""Column-oriented dataset with declared analysis roles.

Values are stored as float64 arrays; missing cells are NaN. Datasets are
immutable — every operation returns a new instance — so they can be shared
freely across bootstrap replicates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyFile,
    MissingColumn,
    NonBinaryGroup,
    TooFewColumns,
    UnknownColumn,
    ZeroVariance,
)


class Role(str, Enum):
    """What a column means to the decomposition machinery."""

    OUTCOME = "outcome"
    GROUP = "group"
    COVARIATE = "covariate"
    EARLY = "early"
    TARGET = "target"
    CONFOUNDER_L = "confounder"
    MISSING_INDICATOR = "missing_indicator"


_SINGLE_COLUMN_ROLES = (Role.OUTCOME, Role.GROUP, Role.TARGET, Role.CONFOUNDER_L)


def _as_role(key) -> Role:
    if isinstance(key, Role):
        return key
    try:
        return Role(str(key).lower())
    except ValueError:
        raise UnknownColumn(f"unknown role: {key!r}") from None


def normalize_roles(roles: Mapping) -> dict[Role, tuple[str, ...]]:
    out: dict[Role, tuple[str, ...]] = {}
    for key, value in roles.items():
        role = _as_role(key)
        names = (value,) if isinstance(value, str) else tuple(value)
        if role in _SINGLE_COLUMN_ROLES and len(names) != 1:
            raise UnknownColumn(f"role {role.value} takes exactly one column, got {names}")
        out[role] = names
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable table of float columns plus a role map.

    Parameters
    ----------
    columns : mapping of name -> 1-d float array (NaN marks missing)
    roles : mapping of Role -> ordered tuple of column names
    """

    columns: Mapping[str, np.ndarray]
    roles: Mapping[Role, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        cols = {}
        n = None
        for name, values in dict(self.columns).items():
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 1:
                raise UnknownColumn(f"column {name!r} is not 1-dimensional")
            arr = arr.copy()
            arr.flags.writeable = False
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise UnknownColumn(
                    f"column {name!r} has {arr.shape[0]} rows, expected {n}"
                )
            cols[name] = arr
        roles = normalize_roles(self.roles)
        for role, names in roles.items():
            for name in names:
                if name not in cols:
                    raise MissingColumn(f"role {role.value} references missing column {name!r}")
        object.__setattr__(self, "columns", MappingProxyType(cols))
        object.__setattr__(self, "roles", MappingProxyType(roles))
        if Role.GROUP in roles:
            g = cols[roles[Role.GROUP][0]]
            bad = ~np.isin(g, (0.0, 1.0)) | np.isnan(g)
            if bad.any():
                raise NonBinaryGroup(
                    f"group column {roles[Role.GROUP][0]!r} must be 0/1 with no "
                    f"missing cells; first bad row: {int(np.flatnonzero(bad)[0])}"
                )

    # -- access ----------------------------------------------------------

    @property
    def n_rows(self) -> int:
        for arr in self.columns.values():
            return arr.shape[0]
        return 0

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(f"no column named {name!r}") from None

    def role_columns(self, role: Role) -> tuple[str, ...]:
        return self.roles.get(role, ())

    def single_role_column(self, role: Role) -> str:
        names = self.role_columns(role)
        if len(names) != 1:
            raise UnknownColumn(f"expected exactly one {role.value} column, have {names}")
        return names[0]

    def covariate_names(self) -> tuple[str, ...]:
        """Covariates plus missing indicators, in declaration order."""
        return self.role_columns(Role.COVARIATE) + self.role_columns(Role.MISSING_INDICATOR)

    # -- derivation ------------------------------------------------------

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset/resample (used by the bootstrap)."""
        idx = np.asarray(indices)
        return Dataset({k: v[idx] for k, v in self.columns.items()}, dict(self.roles))

    def with_columns(self, new: Mapping[str, np.ndarray], roles: Mapping | None = None) -> "Dataset":
        """Copy with columns added/replaced and optional extra role bindings."""
        cols = dict(self.columns)
        cols.update(new)
        merged = {role: names for role, names in self.roles.items()}
        if roles:
            for key, value in normalize_roles(roles).items():
                merged[key] = merged.get(key, ()) + tuple(
                    n for n in value if n not in merged.get(key, ())
                )
        return Dataset(cols, merged)

    def with_roles(self, roles: Mapping) -> "Dataset":
        """Copy with the role map replaced."""
        return Dataset(dict(self.columns), roles)


# -- CSV ------------------------------------------------------------------


def _parse_cell(text: str) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_csv(path, role_declarations: Mapping | None = None) -> Dataset:
    """Read a UTF-8, comma-separated, headered CSV into a Dataset.

    Empty or unparseable cells become missing (NaN). The group column, if
    bound, must be strictly 0/1 with no missing cells.

    Raises
    ------
    EmptyFile, MissingColumn, NonBinaryGroup
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        rows = [[_parse_cell(cell) for cell in row] for row in reader if row]
    if not rows:
        raise EmptyFile(f"{path}: header but no data rows")
    width = len(header)
    data = np.full((len(rows), width), np.nan)
    for i, row in enumerate(rows):
        data[i, : min(width, len(row))] = row[:width]
    columns = {name: data[:, j] for j, name in enumerate(header)}
    return Dataset(columns, normalize_roles(role_declarations or {}))


def write_csv(d: Dataset, path) -> None:
    """Write a Dataset back to CSV; round-trips finite values bit-exactly.

    Floats are serialized with repr(), which is the shortest string that
    parses back to the same double. Missing cells become empty strings.
    """
    names = list(d.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        arrays = [d.columns[n] for n in names]
        for i in range(d.n_rows):
            writer.writerow(
                ["" if math.isnan(a[i]) else repr(float(a[i])) for a in arrays]
            )


# -- preprocessing ---------------------------------------------------------


def add_missing_indicators(d: Dataset, columns: Sequence[str], fill: float = 0.0) -> Dataset:
    """Replace missing cells by `fill` and append 0/1 indicators.

    For each named column ``c`` a new column ``c_miss`` is appended
    (1 = the cell was missing) with role MISSING_INDICATOR, and missing
    cells of ``c`` are replaced by ``fill``. Non-missing cells are untouched.
    """
    new: dict[str, np.ndarray] = {}
    indicator_names = []
    for name in columns:
        values = d.column(name)
        indicator_name = f"{name}_miss"
        if indicator_name in d.columns or indicator_name in new:
            raise UnknownColumn(f"indicator column {indicator_name!r} already exists")
        missing = np.isnan(values)
        filled = np.where(missing, fill, values)
        new[name] = filled
        new[indicator_name] = missing.astype(float)
        indicator_names.append(indicator_name)
    return d.with_columns(new, {Role.MISSING_INDICATOR: indicator_names})


def first_principal_component(d: Dataset, columns: Sequence[str]) -> np.ndarray:
    """Scores of the leading principal component of the standardized columns.

    Columns are centered and scaled to unit sample variance, so the
    eigendecomposition runs on their correlation matrix. The sign is fixed so
    the first listed column's loading is nonnegative; the returned scores have
    sample mean 0.

    Raises
    ------
    TooFewColumns, ZeroVariance
    """
    if len(columns) < 2:
        raise TooFewColumns("principal component needs at least two columns")
    mat = np.column_stack([d.column(name) for name in columns])
    if np.isnan(mat).any():
        raise UnknownColumn(
            "missing cells in principal-component inputs; run add_missing_indicators first"
        )
    sd = mat.std(axis=0, ddof=1)
    flat = [name for name, s in zip(columns, sd) if s == 0.0]
    if flat:
        raise ZeroVariance(f"constant column(s): {', '.join(flat)}")
    z = (mat - mat.mean(axis=0)) / sd
    corr = z.T @ z / (z.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(corr)
    leading = eigenvectors[:, np.argmax(eigenvalues)]
    if leading[0] < 0:
        leading = -leading
    scores = z @ leading
    return scores - scores.mean()


def quantile_bin(d: Dataset, columns: Sequence[str], bins: int = 5) -> Dataset:
    """Replace continuous columns by integer quantile-bin codes (0..k-1).

    Bin edges are interior quantiles of the non-missing values; duplicate
    edges (heavily tied data) are collapsed, so fewer than `bins` codes can
    result. Missing cells stay missing.
    """
    if bins < 2:
        raise ZeroVariance("quantile binning needs at least 2 bins")
    new = {}
    for name in columns:
        values = d.column(name)
        finite = values[~np.isnan(values)]
        if finite.size == 0:
            raise ZeroVariance(f"column {name!r} has no observed values to bin")
        edges = np.unique(np.quantile(finite, np.linspace(0, 1, bins + 1)[1:-1]))
        codes = np.searchsorted(edges, values, side="left").astype(float)
        codes[np.isnan(values)] = np.nan
        new[name] = codes
    return d.with_columns(new)
