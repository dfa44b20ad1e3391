import sys

from trajeval.cli import main

sys.exit(main())
