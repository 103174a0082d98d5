"""Exception hierarchy shared across the package."""


class GazesigError(Exception):
    """Base class for all package errors."""


class MalformedHeader(GazesigError):
    pass


class MalformedRecord(GazesigError):
    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyTrack(GazesigError):
    pass


class NonUnitDirection(GazesigError):
    pass


class InvalidRecord(GazesigError):
    pass


class OutOfRangeChannel(GazesigError):
    pass


class LengthMismatch(GazesigError):
    pass


class InvalidWindow(GazesigError):
    pass


class BadMagic(GazesigError):
    pass


class VersionMismatch(GazesigError):
    pass


class ShapeMismatch(GazesigError):
    pass


class SingleClassDataset(GazesigError):
    pass


class MixedOmega(GazesigError):
    pass


class EmptyPrediction(GazesigError):
    pass


class EmptyPerturbationList(GazesigError):
    pass
