"""Exception types shared across the package."""


class CsgsError(Exception):
    """Base class for all csgs errors."""


class GridMismatchError(CsgsError):
    """A field or potential set does not conform to the grid it is used with."""


class ZeroFieldError(CsgsError):
    """The zero pair was passed where a nonzero pair is required."""


class DegenerateNonlinearityError(CsgsError):
    """No fibering scale exists because the nonlinear terms vanish identically."""


class NonpositiveQuadraticFormError(CsgsError):
    """The coupled quadratic form is nonpositive; signals unvalidated potentials."""


class NonFiniteEnergyError(CsgsError):
    """An energy evaluation produced NaN or infinity."""


class ConvergenceError(CsgsError):
    """An iterative routine exhausted its budget without reaching tolerance."""


class CandidateNotPositiveError(CsgsError):
    """A certificate candidate field is not strictly positive at every node."""


class FieldFileError(CsgsError):
    """A field file is malformed: bad magic, unsupported version, short payload."""


class ConfigError(CsgsError):
    """A run configuration is missing, malformed, or out of range."""
