import sys

from nhlab.cli import main

sys.exit(main())
