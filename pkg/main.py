import sys

from app import main

# Entry point: python main.py <subcommand> [options]
if __name__ == "__main__":
    sys.exit(main())
