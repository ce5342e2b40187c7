#!/usr/bin/env python3
"""
Sphere p-curvature - Entry Point

Run with: python -m sphere_pcurv COMMAND [OPTIONS]
See `python -m sphere_pcurv --help` for the commands.
"""

import sys


def main():
    from .cli import main as cli_main

    try:
        sys.exit(cli_main())
    except KeyboardInterrupt:
        print("\n\nAborted by user.", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
