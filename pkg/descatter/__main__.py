import sys

from descatter.cli import main

sys.exit(main())
