import sys

from nakalab.cli import main

sys.exit(main())
