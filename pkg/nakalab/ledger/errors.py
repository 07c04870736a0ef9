class LedgerError(ValueError):
    pass


class InvalidScript(LedgerError):
    pass


class MalformedTransaction(LedgerError):
    pass


class UnknownInput(LedgerError):
    pass


class DoubleSpendWithinTx(LedgerError):
    pass


class BadSignature(LedgerError):
    pass


class ThresholdNotMet(LedgerError):
    pass


class ImmatureHeightLock(LedgerError):
    pass


class ImmatureCoinbase(LedgerError):
    pass


class UnspendableOutput(LedgerError):
    pass


class NegativeFee(LedgerError):
    pass


class UnexpectedCoinbase(LedgerError):
    pass


class IndexOutOfRange(LedgerError):
    pass


class OutputExists(LedgerError):
    pass
