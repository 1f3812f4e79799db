"""Exception hierarchy for trimode.

InputError subclasses map to CLI exit code 1, NumericalError subclasses to 2.
"""


class TrimodeError(Exception):
    """Base class for every error raised by trimode."""


class InputError(TrimodeError, ValueError):
    """Invalid parameters, configuration or input files."""


class ConfigError(InputError):
    """Configuration file or value could not be used."""


class CutoffError(InputError):
    """A truncation or cutoff parameter is below its legal minimum."""


class ObservationFormatError(InputError):
    """A row of an observation CSV could not be parsed."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class NumericalError(TrimodeError, ArithmeticError):
    """A computation failed or left its domain of validity."""


class NonPositiveDefiniteError(NumericalError):
    """Capacitance network is degenerate."""


class ModelValidityError(NumericalError):
    """Effective model is not defined at this operating point."""


class BasisTruncationError(NumericalError):
    """Charge basis too small for the requested circuit."""


class EigensolverError(NumericalError):
    """LAPACK eigensolver did not converge."""


class LabelingError(NumericalError):
    """Eigenstate labels are inconsistent."""


class BranchNotFoundError(NumericalError):
    """A requested spectral branch is not present in the computed levels."""


class HybridizedBranchError(NumericalError):
    """A branch is hybridized where a pure mode was required."""


class ResonanceError(NumericalError):
    """A transition is exactly resonant with the readout resonator."""


class DispersivePoleError(NumericalError):
    """A dispersive-shift denominator vanishes."""


class BootstrapError(NumericalError):
    """Too many bootstrap refits failed."""


class DecoherenceInputError(NumericalError):
    """A decoherence formula was evaluated outside its domain."""


class FluxPointError(NumericalError):
    """Wraps a failure at one flux point of a sweep."""

    def __init__(self, flux: float, cause: Exception):
        self.flux = flux
        self.cause = cause
        super().__init__(f"at phi_ext={flux:.6g}: {cause}")


class ObservationError(NumericalError):
    """Wraps a failure while predicting one observation."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"observation {index}: {cause}")
