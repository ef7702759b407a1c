import sys

from edramcap.cli import main

sys.exit(main())
