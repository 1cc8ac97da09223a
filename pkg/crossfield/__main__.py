import sys

from crossfield import helper
from crossfield.cli import main

sys.excepthook = helper.excepthook
sys.exit(main())
