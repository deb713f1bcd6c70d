import sys

from confcoreset.cli import main

sys.exit(main())
