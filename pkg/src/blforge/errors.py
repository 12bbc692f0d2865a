"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so CLI and service
layers can map failures to exit codes / payloads without string matching.
"""


class BLForgeError(Exception):
    """Base class for all blforge errors."""

    code = "Error"

    def __init__(self, message=""):
        super().__init__(message or self.code)


class InvalidDatumError(BLForgeError):
    """Datum violates one or more structural invariants."""

    code = "InvalidDatum"

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DimensionMismatch(BLForgeError):
    code = "DimensionMismatch"


class AsymmetricMatrix(BLForgeError):
    code = "AsymmetricMatrix"


class NotPSD(BLForgeError):
    code = "NotPSD"


class NotSPD(BLForgeError):
    code = "NotSPD"


class SingularA(BLForgeError):
    code = "SingularA"


class NegativeEigenvalue(BLForgeError):
    code = "NegativeEigenvalue"


class NotCritical(BLForgeError):
    code = "NotCritical"


class InfeasibleB(BLForgeError):
    code = "InfeasibleB"


class SingularM(BLForgeError):
    code = "SingularM"


class NumericalBreakdown(BLForgeError):
    code = "NumericalBreakdown"


class QcalPresent(BLForgeError):
    code = "QcalPresent"


class SingularIntertwiner(BLForgeError):
    code = "SingularIntertwiner"


class KKTNotPassed(BLForgeError):
    code = "KKTNotPassed"


class NotGeometric(BLForgeError):
    code = "NotGeometric"


class TooManyFactors(BLForgeError):
    code = "TooManyFactors"


class DimensionTooLarge(BLForgeError):
    code = "DimensionTooLarge"


class NonIntegerExponentWithClosedForm(BLForgeError):
    code = "NonIntegerExponentWithClosedForm"


class UnsupportedDimension(BLForgeError):
    code = "UnsupportedDimension"


class MassMismatch(BLForgeError):
    code = "MassMismatch"


class DegenerateDenominator(BLForgeError):
    code = "DegenerateDenominator"


class EmptyList(BLForgeError):
    code = "EmptyList"


class InvalidParams(BLForgeError):
    code = "InvalidParams"


class BetaNotAboveOne(BLForgeError):
    code = "BetaNotAboveOne"


class ThresholdViolated(BLForgeError):
    code = "ThresholdViolated"


class ConditionViolated(BLForgeError):
    code = "ConditionViolated"


class ParseError(BLForgeError):
    code = "ParseError"


class UnknownCommand(BLForgeError):
    code = "UnknownCommand"
