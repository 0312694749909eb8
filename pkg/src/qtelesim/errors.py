"""Exception hierarchy.

Every error carries a short ``category`` string so the command line can
report failures in a machine-readable way.
"""


class QTeleSimError(Exception):
    category = "error"


class ZeroNorm(QTeleSimError, ValueError):
    category = "zero_norm"


class TooManyQubits(QTeleSimError, ValueError):
    category = "too_many_qubits"


class BadIndex(QTeleSimError, IndexError):
    category = "bad_index"


class DimensionMismatch(QTeleSimError, ValueError):
    category = "dimension_mismatch"


class LengthMismatch(QTeleSimError, ValueError):
    category = "length_mismatch"


class EmptyKey(QTeleSimError, ValueError):
    category = "empty_key"


class IncompleteTranscript(QTeleSimError, ValueError):
    category = "incomplete_transcript"


class MessageLost(QTeleSimError):
    """The classical correction message was dropped by the channel.

    The partially filled transcript is attached as ``transcript``.
    """

    category = "message_lost"

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class ParseError(QTeleSimError, ValueError):
    category = "parse_error"

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ValidationError(QTeleSimError, ValueError):
    category = "validation_error"

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class IoError(QTeleSimError, OSError):
    category = "io_error"
