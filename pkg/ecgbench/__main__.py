import sys

from ecgbench.main import main

sys.exit(main())
