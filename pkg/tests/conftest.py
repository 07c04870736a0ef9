import hashlib

import pytest

from nakalab.consensus.block import Target, make_genesis, mine_block
from nakalab.consensus.chain import ChainState, build_template
from nakalab.crypto.ecc import generate_private_key, derive_public_key
from nakalab.ledger.script import PayToPubKeyHash
from nakalab.utils.args import ConsensusConfig

TEST_BITS = 4


def key_for(name: str):
    return generate_private_key(hashlib.sha256(name.encode()).digest())


@pytest.fixture(scope='session')
def keys():
    return {name: key_for(name) for name in ('alice', 'bob', 'carol', 'dave')}


@pytest.fixture(scope='session')
def pubkeys(keys):
    return {name: derive_public_key(k) for name, k in keys.items()}


@pytest.fixture(scope='session')
def genesis():
    return make_genesis(target=Target.from_bits(TEST_BITS))


@pytest.fixture
def params():
    return ConsensusConfig(retarget_interval=8, coinbase_maturity=2)


@pytest.fixture
def chain(genesis, params):
    return ChainState(genesis, params)


@pytest.fixture
def miner_script(pubkeys):
    return PayToPubKeyHash.for_key(pubkeys['alice'])


@pytest.fixture
def mine_on(miner_script):
    """Mine one block on `parent` (default: the active tip) without connecting it."""

    def _mine(chain: ChainState, parent=None, now=None, mempool=(), extra_nonce=0, script=None):
        template = build_template(chain, list(mempool), script or miner_script, now=now, parent=parent,
                                  extra_nonce=extra_nonce)
        return mine_block(template, 0, 1 << 20)

    return _mine
