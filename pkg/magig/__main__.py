import sys

from magig.main import main

sys.exit(main())
