import sys

from kinex.cli import main

sys.exit(main())
