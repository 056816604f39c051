import sys

from nlconsensus.cli import main

sys.exit(main())
