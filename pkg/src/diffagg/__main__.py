import sys

from diffagg.cli import main

sys.exit(main())
