"""Exception hierarchy shared by every module of the package."""


class OEDCalibError(Exception):
    """Base class for all package errors."""


class NumericalError(OEDCalibError):
    """A numerical routine could not produce a trustworthy value."""


class TargetOutOfRange(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class DomainError(OEDCalibError, ValueError):
    """A point lies outside the space the model is defined on."""


class SingularWeight(NumericalError):
    pass


class ScaleError(OEDCalibError, ValueError):
    """A design on the wrong scale was passed to an operation."""


class EmptyDesign(OEDCalibError, ValueError):
    pass


class SingularDesign(NumericalError):
    """The design cannot estimate the quantity the criterion needs."""


class NotEstimable(SingularDesign):
    pass


class Unsupported(OEDCalibError):
    pass


class DegenerateSystem(NumericalError):
    pass


class CertificationFailed(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class SingularSequence(SingularDesign):
    pass


class ConfigError(OEDCalibError, ValueError):
    pass
