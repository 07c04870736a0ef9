from nakalab.ledger.emission import reward_at_height, cumulative_supply, MAX_SUPPLY
from nakalab.ledger.script import LockingScript, PayToPubKeyHash, MultiSig, HeightLock, DataEmbed
from nakalab.ledger.transaction import OutPoint, TxInput, TxOutput, Transaction, txid, signing_digest, \
    embed_document, sign_transaction, build_coinbase, coinbase_height
from nakalab.ledger.utxo import UTXOSet, UtxoEntry, UtxoDiff, tx_fee, validate_transaction, apply_block_to_utxo

__all__ = ['reward_at_height', 'cumulative_supply', 'MAX_SUPPLY',
           'LockingScript', 'PayToPubKeyHash', 'MultiSig', 'HeightLock', 'DataEmbed',
           'OutPoint', 'TxInput', 'TxOutput', 'Transaction', 'txid', 'signing_digest', 'embed_document',
           'sign_transaction', 'build_coinbase', 'coinbase_height',
           'UTXOSet', 'UtxoEntry', 'UtxoDiff', 'tx_fee', 'validate_transaction', 'apply_block_to_utxo']
