import sys

from decisive.cli import main

sys.exit(main())
