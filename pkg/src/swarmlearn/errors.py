"""Exception hierarchy shared across the package."""


class SwarmError(Exception):
    """Base class for every error raised by swarmlearn."""


# parameter arithmetic
class ShapeMismatch(SwarmError, ValueError):
    pass


class EmptyInput(SwarmError, ValueError):
    pass


class NonFinite(SwarmError, ValueError):
    pass


# data handling
class InvalidFraction(SwarmError, ValueError):
    pass


class InsufficientData(SwarmError, ValueError):
    pass


class ParseError(SwarmError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelError(ParseError):
    pass


class RangeError(SwarmError, ValueError):
    pass


# metrics
class DegenerateLabels(SwarmError, ValueError):
    pass


class DegenerateClusters(SwarmError, ValueError):
    pass


class CoincidentCentroids(SwarmError, ValueError):
    pass


# wire codec
class OversizePayload(SwarmError, ValueError):
    pass


class DecodeError(SwarmError):
    """A frame could not be parsed. ``field`` names the earliest bad field."""

    field = "frame"

    def __init__(self, message, offset=None):
        self.offset = offset
        super().__init__(message)


class BadMagic(DecodeError):
    field = "magic"


class BadVersion(DecodeError):
    field = "version"


class UnknownKind(DecodeError):
    field = "kind"


class TruncatedFrame(DecodeError):
    field = "payload_len"


class LengthMismatch(DecodeError):
    field = "payload"


class BadPayload(DecodeError):
    field = "payload"


# networking
class TransportError(SwarmError):
    pass


class Timeout(TransportError):
    pass


class ConnRefused(TransportError):
    pass


class TransportDown(TransportError):
    def __init__(self, message, reports=None):
        self.reports = list(reports or [])
        super().__init__(message)


class NoPeersReachable(SwarmError):
    pass


class IdCollision(SwarmError):
    pass


# run control
class AlreadyStopped(SwarmError, RuntimeError):
    pass


class MissingCells(SwarmError):
    def __init__(self, cells):
        self.cells = list(cells)
        super().__init__(f"{len(self.cells)} missing cell(s): {self.cells[:5]}")
