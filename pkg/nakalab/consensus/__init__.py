from nakalab.consensus.block import Target, BlockHeader, Block, HEADER_SIZE, header_hash, check_pow, mine_block, \
    retarget, target_from_bits, block_template, make_genesis, genesis_message
from nakalab.consensus.chain import EventKind, ConnectEvent, BlockEntry, ChainState, validate_block, connect_block, \
    build_template
from nakalab.consensus.errors import BlockValidationError, BadPoW, WrongTarget, BadMerkleRoot, BadCoinbase, \
    ExcessCoinbase, DoubleSpendInBlock, DuplicateTxid, BadTimestamp, BadTransaction, BadGenesis, UnknownParent, \
    MessageTooLong, NonPositiveTimespan, MalformedBlock, CorruptChain, Exhausted
from nakalab.consensus.store import ChainStore, InMemoryChainStore, FileChainStore

__all__ = ['Target', 'BlockHeader', 'Block', 'HEADER_SIZE', 'header_hash', 'check_pow', 'mine_block', 'retarget',
           'target_from_bits', 'block_template', 'make_genesis', 'genesis_message', 'EventKind', 'ConnectEvent',
           'BlockEntry', 'ChainState', 'validate_block', 'connect_block', 'build_template', 'BlockValidationError',
           'BadPoW', 'WrongTarget', 'BadMerkleRoot', 'BadCoinbase', 'ExcessCoinbase', 'DoubleSpendInBlock',
           'DuplicateTxid', 'BadTimestamp', 'BadTransaction', 'BadGenesis', 'UnknownParent', 'MessageTooLong',
           'NonPositiveTimespan', 'MalformedBlock', 'CorruptChain', 'Exhausted', 'ChainStore', 'InMemoryChainStore',
           'FileChainStore']
