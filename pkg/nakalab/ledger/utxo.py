"""
Immutable UTXO snapshots.

A snapshot is a stack of layers (added entries, removed outpoints) over a flat root; applying or
reverting a block adds one layer, and deep stacks are flattened. Embedded-data outputs are kept as
unspendable markers: they never count as spendable, but spending one reports UnspendableOutput.
"""
import dataclasses
from typing import Iterator, Mapping, Optional, Union

from nakalab.config import COINBASE_MATURITY
from nakalab.ledger.errors import UnknownInput, DoubleSpendWithinTx, ImmatureCoinbase, UnspendableOutput, \
    NegativeFee, UnexpectedCoinbase, OutputExists
from nakalab.ledger.transaction import OutPoint, Transaction, TxOutput


@dataclasses.dataclass(frozen=True)
class UtxoEntry:
    output: TxOutput
    height: int
    coinbase: bool = False


class _Unspendable:
    def __repr__(self):
        return 'UNSPENDABLE'


UNSPENDABLE = _Unspendable()
_MISSING = object()

Record = Union[UtxoEntry, _Unspendable]


@dataclasses.dataclass(frozen=True)
class UtxoDiff:
    """What one block did to the set: outputs it created and the entries it consumed."""
    created: Mapping[OutPoint, Record]
    spent: Mapping[OutPoint, UtxoEntry]


class UTXOSet:
    FLATTEN_DEPTH = 64

    def __init__(self, entries: Optional[Mapping[OutPoint, Record]] = None, height: int = -1):
        self.height = height
        self._parent: Optional[UTXOSet] = None
        self._added: dict = dict(entries or {})
        self._removed: frozenset = frozenset()
        self._depth = 0
        self._spendable: Optional[dict] = None

    @classmethod
    def _layer(cls, parent: 'UTXOSet', added: Mapping, removed, height: int) -> 'UTXOSet':
        layer = cls.__new__(cls)
        layer.height = height
        layer._parent = parent
        layer._added = dict(added)
        layer._removed = frozenset(removed)
        layer._depth = parent._depth + 1
        layer._spendable = None
        if layer._depth > cls.FLATTEN_DEPTH:
            return layer.flattened()
        return layer

    def _lookup(self, outpoint: OutPoint):
        layer = self
        while layer is not None:
            rec = layer._added.get(outpoint, _MISSING)
            if rec is not _MISSING:
                return rec
            if outpoint in layer._removed:
                return _MISSING
            layer = layer._parent
        return _MISSING

    def _records(self) -> dict:
        chain = []
        layer = self
        while layer is not None:
            chain.append(layer)
            layer = layer._parent
        records = {}
        for layer in reversed(chain):
            for op in layer._removed:
                records.pop(op, None)
            records.update(layer._added)
        return records

    def flattened(self) -> 'UTXOSet':
        return UTXOSet(self._records(), self.height)

    def _spendable_view(self) -> dict:
        if self._spendable is None:
            self._spendable = {op: rec for op, rec in self._records().items() if rec is not UNSPENDABLE}
        return self._spendable

    def get(self, outpoint: OutPoint) -> Optional[UtxoEntry]:
        rec = self._lookup(outpoint)
        if rec is _MISSING or rec is UNSPENDABLE:
            return None
        return rec

    def is_unspendable(self, outpoint: OutPoint) -> bool:
        return self._lookup(outpoint) is UNSPENDABLE

    def __contains__(self, outpoint: OutPoint) -> bool:
        return self.get(outpoint) is not None

    def __len__(self) -> int:
        return len(self._spendable_view())

    def __iter__(self) -> Iterator[OutPoint]:
        return iter(self._spendable_view())

    def items(self):
        return self._spendable_view().items()

    def total_value(self) -> int:
        return sum(e.output.amount for e in self._spendable_view().values())

    def __eq__(self, other):
        if not isinstance(other, UTXOSet):
            return NotImplemented
        return self.height == other.height and self._spendable_view() == other._spendable_view()

    def apply_diff(self, diff: UtxoDiff) -> 'UTXOSet':
        return UTXOSet._layer(self, diff.created, diff.spent.keys(), self.height + 1)

    def revert(self, diff: UtxoDiff) -> 'UTXOSet':
        return UTXOSet._layer(self, diff.spent, diff.created.keys(), self.height - 1)

    def __repr__(self):
        return f'UTXOSet(height={self.height}, size={len(self)})'


class BlockStaging:
    """Running view of a snapshot while a block's transactions are applied in order."""

    def __init__(self, base: UTXOSet, height: Optional[int] = None):
        self.base = base
        self.height = base.height + 1 if height is None else height
        self.created: dict[OutPoint, Record] = {}
        self.spent: dict[OutPoint, UtxoEntry] = {}

    def _lookup(self, outpoint: OutPoint):
        if outpoint in self.created:
            return self.created[outpoint]
        if outpoint in self.spent:
            return _MISSING
        return self.base._lookup(outpoint)

    def get(self, outpoint: OutPoint) -> Optional[UtxoEntry]:
        rec = self._lookup(outpoint)
        if rec is _MISSING or rec is UNSPENDABLE:
            return None
        return rec

    def is_unspendable(self, outpoint: OutPoint) -> bool:
        return self._lookup(outpoint) is UNSPENDABLE

    def add(self, tx: Transaction):
        for i in range(len(tx.outputs)):
            op = OutPoint(tx.txid, i)
            if self._lookup(op) is not _MISSING:
                raise OutputExists(f'{op} is already unspent')
        for inp in tx.inputs:
            op = inp.outpoint
            if op in self.created:
                del self.created[op]
            else:
                self.spent[op] = self.base.get(op)
        for i, out in enumerate(tx.outputs):
            op = OutPoint(tx.txid, i)
            self.created[op] = UtxoEntry(out, self.height, tx.is_coinbase) if out.script.spendable else UNSPENDABLE

    def diff(self) -> UtxoDiff:
        return UtxoDiff(dict(self.created), dict(self.spent))


def _resolve(tx: Transaction, utxo) -> list[UtxoEntry]:
    entries = []
    for inp in tx.inputs:
        entry = utxo.get(inp.outpoint)
        if entry is None:
            if utxo.is_unspendable(inp.outpoint):
                raise UnspendableOutput(f'{inp.outpoint} is an embedded-data output')
            raise UnknownInput(f'{inp.outpoint} is not in the unspent set')
        entries.append(entry)
    return entries


def tx_fee(tx: Transaction, utxo) -> int:
    if tx.is_coinbase:
        raise UnexpectedCoinbase('coinbase transactions pay no fee')
    fee = sum(e.output.amount for e in _resolve(tx, utxo)) - tx.output_total
    if fee < 0:
        raise NegativeFee(f'outputs exceed inputs by {-fee} sat')
    return fee


def validate_transaction(tx: Transaction, utxo, height: int, coinbase_maturity: int = COINBASE_MATURITY):
    """Raise the matching LedgerError unless `tx` may be included in a block at `height`."""
    if tx.is_coinbase:
        raise UnexpectedCoinbase('coinbase transactions are validated with their block')
    seen = set()
    for inp in tx.inputs:
        if inp.outpoint in seen:
            raise DoubleSpendWithinTx(f'{inp.outpoint} consumed twice')
        seen.add(inp.outpoint)
    entries = _resolve(tx, utxo)
    digest = tx.sighash
    for inp, entry in zip(tx.inputs, entries):
        if entry.coinbase and height - entry.height < coinbase_maturity:
            raise ImmatureCoinbase(f'{inp.outpoint} matures at height {entry.height + coinbase_maturity}')
        entry.output.script.check(inp.witnesses, digest, height)
    fee = sum(e.output.amount for e in entries) - tx.output_total
    if fee < 0:
        raise NegativeFee(f'outputs exceed inputs by {-fee} sat')


def block_diff(block, utxo: UTXOSet) -> UtxoDiff:
    staging = BlockStaging(utxo)
    for tx in block.transactions:
        staging.add(tx)
    return staging.diff()


def apply_block_to_utxo(block, utxo: UTXOSet) -> UTXOSet:
    """Successor snapshot; new entries are created at height utxo.height + 1."""
    return utxo.apply_diff(block_diff(block, utxo))
