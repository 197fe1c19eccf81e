import sys
from kstate_ring.cli import main

sys.exit(main())
