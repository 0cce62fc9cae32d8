"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
0 (ok), 1 (input), 2 (gateway) and 3 (internal invariant).
"""


class ArchSelectError(Exception):
    exit_code = 3


class InputError(ArchSelectError):
    exit_code = 1


class UnknownQaLabel(InputError, KeyError):
    def __init__(self, label):
        super().__init__(label)
        self.label = label

    def __str__(self):
        return f"unknown quality attribute label: {self.label!r}"


class MalformedInput(InputError, ValueError):
    pass


class DuplicateId(InputError, ValueError):
    pass


class UnknownAsrId(InputError, KeyError):
    pass


class UnknownQa(InputError, KeyError):
    pass


class InvalidMatrix(MalformedInput):
    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid decision matrix: {msg}")


class InvalidProblem(InputError, ValueError):
    pass


class ChoiceNotInMatrix(InputError, KeyError):
    pass


class InvalidDeviation(InputError, ValueError):
    pass


class NoAsrsForQa(InputError, ValueError):
    pass


class ChunkTooLarge(InputError, ValueError):
    pass


class ConfigError(InputError, ValueError):
    pass


class GatewayError(ArchSelectError):
    exit_code = 2


class EndpointUnreachable(GatewayError):
    pass


class MissingCredential(GatewayError):
    pass


class MalformedAfterRetries(GatewayError):
    pass


class DimensionMismatch(GatewayError):
    pass


class UnparseableResponse(GatewayError):
    pass


class IdMismatch(GatewayError):
    pass


class UnknownCgId(GatewayError):
    pass


class InvariantViolation(ArchSelectError):
    exit_code = 3
