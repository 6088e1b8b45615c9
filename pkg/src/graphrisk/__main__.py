import sys

from graphrisk.cli import main

sys.exit(main())
