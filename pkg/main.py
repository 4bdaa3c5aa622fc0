"""
Main entry point for kronml.
Runs the command-line interface; see `python main.py --help`.
"""

import sys

from src.kronml.cli import main


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n👋 Exiting...")
        sys.exit(0)
