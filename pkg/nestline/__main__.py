import sys

from nestline.main import main

sys.exit(main())
