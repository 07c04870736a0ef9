import os
import struct
from abc import ABC, abstractmethod
from typing import Iterator, Optional

from nakalab.consensus.block import Block
from nakalab.consensus.chain import ChainState, ConnectEvent, EventKind
from nakalab.consensus.errors import CorruptChain, MalformedBlock
from nakalab.utils.args import ConsensusConfig

RECORD_MAGIC = b'NKC1'
_LEN = struct.Struct('<I')


class ChainStore(ABC):
    """
    Where a node's blocks live between runs. Blocks are appended in the order they were connected,
    so replaying the store through connect_block rebuilds the same ChainState.
    """

    @abstractmethod
    def append(self, block: Block):
        raise NotImplementedError

    @abstractmethod
    def blocks(self) -> Iterator[Block]:
        raise NotImplementedError

    @abstractmethod
    def exists(self) -> bool:
        raise NotImplementedError

    def replay(self, params: Optional[ConsensusConfig] = None) -> ChainState:
        it = iter(self.blocks())
        genesis = next(it, None)
        if genesis is None:
            raise CorruptChain('chain store is empty')
        chain = ChainState(genesis, params)
        for block in it:
            event = chain.connect_block(block)
            if event.kind == EventKind.REJECTED_INVALID:
                raise CorruptChain(f'stored block {block.hash.hex()} is invalid: {event.reason}')
        return chain

    def connect_and_append(self, chain: ChainState, block: Block) -> ConnectEvent:
        event = chain.connect_block(block)
        if event.kind not in (EventKind.REJECTED_INVALID, EventKind.ALREADY_KNOWN):
            self.append(block)
        return event


class InMemoryChainStore(ChainStore):

    def __init__(self):
        self._blocks: list[Block] = []

    def append(self, block: Block):
        self._blocks.append(block)

    def blocks(self) -> Iterator[Block]:
        return iter(list(self._blocks))

    def exists(self) -> bool:
        return len(self._blocks) > 0


class FileChainStore(ChainStore):
    """Append-only file of records: magic, 4-byte little-endian length, serialized block."""

    def __init__(self, path: str):
        self.path = path

    def exists(self) -> bool:
        return os.path.exists(self.path) and os.path.getsize(self.path) > 0

    def append(self, block: Block):
        directory = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(directory, exist_ok=True)
        raw = block.serialize()
        with open(self.path, 'ab') as f:
            f.write(RECORD_MAGIC + _LEN.pack(len(raw)) + raw)

    def blocks(self) -> Iterator[Block]:
        with open(self.path, 'rb') as f:
            data = f.read()
        pos = 0
        while pos < len(data):
            if data[pos:pos + 4] != RECORD_MAGIC:
                raise CorruptChain(f'bad record magic at offset {pos}')
            if pos + 8 > len(data):
                raise CorruptChain(f'truncated record length at offset {pos}')
            size, = _LEN.unpack_from(data, pos + 4)
            start = pos + 8
            if start + size > len(data):
                raise CorruptChain(f'record at offset {pos} claims {size} bytes, file ends first')
            try:
                yield Block.deserialize(data[start:start + size])
            except MalformedBlock as e:
                raise CorruptChain(f'record at offset {pos}: {e}') from e
            pos = start + size
