import sys

from derange.cli import main

sys.exit(main())
