"""
Main entry point for the tabcds experiment harness.
"""

import sys

from tabcds.cli.main import main as cli_main


def main():
    """Run the tabcds command line interface."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
