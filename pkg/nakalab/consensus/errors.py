class BlockValidationError(ValueError):

    @property
    def reason(self) -> str:
        return f'{type(self).__name__}: {self}'


class BadPoW(BlockValidationError):
    pass


class WrongTarget(BlockValidationError):
    pass


class BadMerkleRoot(BlockValidationError):
    pass


class BadCoinbase(BlockValidationError):
    pass


class ExcessCoinbase(BlockValidationError):
    pass


class DoubleSpendInBlock(BlockValidationError):
    pass


class DuplicateTxid(BlockValidationError):
    pass


class BadTimestamp(BlockValidationError):
    pass


class BadTransaction(BlockValidationError):

    def __init__(self, detail):
        super().__init__(f'{type(detail).__name__}: {detail}')
        self.detail = detail


class BadGenesis(BlockValidationError):
    pass


class MessageTooLong(ValueError):
    pass


class NonPositiveTimespan(ValueError):
    pass


class MalformedBlock(ValueError):
    pass


class Exhausted(RuntimeError):
    """The nonce slice held no solution; perturb the coinbase and retry."""


class UnknownParent(BlockValidationError):
    pass


class CorruptChain(ValueError):
    pass
