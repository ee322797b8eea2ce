import sys

from vamchess.cli import main

sys.exit(main())
