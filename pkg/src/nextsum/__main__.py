import sys

from nextsum.cli import main

sys.exit(main())
