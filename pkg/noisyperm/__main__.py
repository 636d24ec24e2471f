import sys

from noisyperm.cli import main

sys.exit(main())
