"""Exception types shared across the package.

Loaders, learners and estimators raise distinct classes so callers can
react to the failure mode rather than parse messages.
"""


class RepcauseError(Exception):
    """Base class for all package errors."""


# --- data / file format ---------------------------------------------------

class LoadError(RepcauseError):
    """A representation file could not be parsed into a valid dataset."""


class BadMagicError(LoadError):
    pass


class UnsupportedVersionError(LoadError):
    pass


class TruncatedPayloadError(LoadError):
    """Byte length disagrees with the header (short or trailing bytes)."""


class NonFiniteValueError(LoadError):
    pass


class InvalidTreatmentError(LoadError):
    """Treatment entries must be exactly 0 or 1."""


class InvalidLabelError(LoadError):
    """Label entries must be exactly 0 or 1."""


class ValidationError(RepcauseError):
    """In-memory dataset violates a structural invariant."""


class MissingFieldError(RepcauseError):
    """Operation requires a field (t, y, label) the dataset lacks."""


class InvalidFoldCountError(RepcauseError):
    pass


# --- transforms -----------------------------------------------------------

class DimensionError(RepcauseError):
    """Shapes of operands do not line up."""


class DegenerateTransformError(RepcauseError):
    """Could not sample a well-conditioned invertible matrix."""


# --- learners -------------------------------------------------------------

class InvalidSpecError(RepcauseError):
    """Learner hyperparameters violate their declared invariants."""


class NumericsError(RepcauseError):
    """Non-finite values encountered during fitting."""


# --- estimators -----------------------------------------------------------

class EmptyArmError(RepcauseError):
    """A treatment arm has no (or too few) observations."""


class CollinearityError(RepcauseError):
    pass


class DegenerateResidualizationError(RepcauseError):
    """Treatment residuals carry no variation; the slope is undefined."""


# --- warnings -------------------------------------------------------------

class RepcauseWarning(UserWarning):
    pass


class DuplicateWarning(RepcauseWarning):
    """Duplicate points produced zero nearest-neighbour distances."""


class OverlapWarning(RepcauseWarning):
    """A large share of estimated propensities needed clipping."""


class PoorEncodingWarning(RepcauseWarning):
    """Autoencoder reconstruction error is too high for reliable confounding."""
