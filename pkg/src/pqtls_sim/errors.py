"""Exception types raised across the simulator."""


class PqtlsSimError(Exception):
    pass


class SchedulingInPast(PqtlsSimError):
    def __init__(self, at, now):
        super().__init__(f"cannot schedule at t={at}us, clock is at {now}us")
        self.at = at
        self.now = now


class UnknownAlgorithm(PqtlsSimError, KeyError):
    def __init__(self, alg_id):
        super().__init__(alg_id)
        self.alg_id = alg_id

    def __str__(self):
        return f"unknown algorithm {self.alg_id!r}"


class NoClassicalPartner(PqtlsSimError):
    pass


class CostFileMissingEntry(PqtlsSimError):
    def __init__(self, alg_id):
        super().__init__(f"cost file has no entry for {alg_id!r}")
        self.alg_id = alg_id


class CostFileMalformed(PqtlsSimError):
    pass


class KeyShareTooLarge(PqtlsSimError):
    def __init__(self, alg_id, size):
        super().__init__(
            f"{alg_id}: key share of {size} bytes exceeds the 65535-byte extension limit"
        )
        self.alg_id = alg_id
        self.size = size


class HandshakeFailure(PqtlsSimError):
    """Base for failures recorded as tagged measurement rows."""

    tag = "Failure"


class HandshakeTimeout(HandshakeFailure):
    tag = "Timeout"


class HandshakeCorruptAbort(HandshakeFailure):
    tag = "CorruptAbort"


class ConnectTimeout(HandshakeFailure):
    tag = "ConnectFail"


class SchemaError(PqtlsSimError, ValueError):
    def __init__(self, row, column, token, reason=""):
        msg = f"row {row}, column {column}: bad token {token!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.row = row
        self.column = column
        self.token = token


class EmptySeries(PqtlsSimError, ValueError):
    pass


class MissingInput(PqtlsSimError, FileNotFoundError):
    pass


class MalformedResultFile(PqtlsSimError, ValueError):
    def __init__(self, path, line, reason=""):
        super().__init__(f"{path}:{line}: {reason or 'malformed line'}")
        self.path = path
        self.line = line


class DegenerateInput(PqtlsSimError, ValueError):
    pass
