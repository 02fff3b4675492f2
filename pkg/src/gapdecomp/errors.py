"""Exception and warning taxonomy shared across the package."""


class AnalysisError(Exception):
    """Base class for all errors raised by gapdecomp."""


# --- data / ingestion ---------------------------------------------------


class MissingColumn(AnalysisError):
    """A role declaration references a column that is not in the file."""


class UnknownColumn(AnalysisError):
    """An operation references a column that is not in the dataset."""


class NonBinaryGroup(AnalysisError):
    """The group column contains values other than 0/1 (or missing cells)."""


class EmptyFile(AnalysisError):
    """The CSV has no header or no data rows."""


class ZeroVariance(AnalysisError):
    """A column required to vary is constant."""


class TooFewColumns(AnalysisError):
    """The principal-component helper needs at least two columns."""


# --- regression ---------------------------------------------------------


class RankDeficient(AnalysisError):
    """Design matrix is not full column rank.

    Carries the labels of the dependent columns in ``columns``.
    """

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(
            "design matrix is rank deficient; dependent columns: "
            + ", ".join(self.columns)
        )


class Separation(AnalysisError):
    """Logistic fit diverged (perfectly or quasi-separated data)."""


class NotConverged(AnalysisError):
    """Iterative fit hit its iteration cap without meeting tolerances."""


# --- decompositions -----------------------------------------------------


class NearZeroDenominator(AnalysisError):
    """A coefficient ratio needed by the marginal-target formulas is undefined."""


class EmptyStratum(AnalysisError):
    """A standardization sum needs a conditional mean from an unobserved cell.

    ``cell`` holds the offending (group, variable=value, ...) description.
    """

    def __init__(self, cell):
        self.cell = cell
        super().__init__(f"no observations in required stratum: {cell}")


class TooManyLevels(AnalysisError):
    """A column declared discrete has more distinct levels than allowed."""


class EmptyGroup(AnalysisError):
    """A group-stratified fit was requested but one group has no rows."""


class InvalidSpec(AnalysisError):
    """An AnalysisSpec violates a structural constraint (e.g. P5 without L)."""


class UnsupportedMode(AnalysisError):
    """Closed-form truth is unavailable for this generator configuration."""


# --- inference ----------------------------------------------------------


class InvalidB(AnalysisError):
    """Bootstrap replicate count below the minimum of 2."""


class TooManyFailures(AnalysisError):
    """More than 10% of bootstrap replicates failed to produce an estimate."""


class DegenerateInitial(AnalysisError):
    """Proportion reduced is undefined for a (near) null initial disparity."""


# --- cli ----------------------------------------------------------------


class ConfigError(AnalysisError):
    """Run configuration failed schema or consistency validation."""


class PrevalenceWarning(UserWarning):
    """Rare-outcome ratio formulas applied where the outcome is not rare."""
