"""
Latent tie inference toolkit.

This is the main entry point that imports from the app package.
Usage: python main.py <subcommand> [options]   (python main.py --help)
"""
import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
