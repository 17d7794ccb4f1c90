"""Exception types raised across the package."""


class IacError(ValueError):
    pass


class InvalidInputError(IacError):
    pass


class InvalidCurveError(IacError):
    pass


class SingularBasisError(IacError):
    pass


class RepairFailedError(SingularBasisError):
    pass


class DivergedError(IacError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DecodeError(IacError):
    pass


class ParamsFormatError(IacError):
    pass
