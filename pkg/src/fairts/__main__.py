import sys

from fairts.cli import main

sys.exit(main())
