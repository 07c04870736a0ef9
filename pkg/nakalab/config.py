import os

data_root = os.environ.get('NAKALAB_DATA', os.path.expanduser('~/.nakalab'))

chain_path = f'{data_root}/chain.dat'
output_dir = './out'
scenario_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'experiments', 'scenarios')

# monetary units
COIN = 100_000_000
MAX_MONEY = 21_000_000 * COIN
INITIAL_SUBSIDY = 50 * COIN
HALVING_INTERVAL = 210_000
BLOCKS_PER_YEAR = 52_560

# consensus defaults
RETARGET_INTERVAL = 2016
TARGET_SPACING = 600
RETARGET_CLAMP = 4
COINBASE_MATURITY = 100
MEDIAN_TIME_SPAN = 11
POW_LIMIT = 2 ** 256 - 1

# script limits
DATA_EMBED_LIMIT = 80
MULTISIG_MAX_KEYS = 15

ADDRESS_VERSION = 0x00
BLOCK_VERSION = 1

GENESIS_MESSAGE = b'The Times 03/Jan/2009 Chancellor on brink of second bailout for banks'
GENESIS_TIMESTAMP = 1231006505
