import sys

from detwalk.cli import main

sys.exit(main())
