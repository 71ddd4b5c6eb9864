#!/usr/bin/env python
"""
Launcher script for tabcds.
This is a convenience script that imports the main function from the package.
"""

import sys

from tabcds.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
