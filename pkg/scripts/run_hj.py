#!/usr/bin/env python3
"""
Run one solver operation from a config file.

Usage:
    python scripts/run_hj.py evolve --config config/runs/convergent_evolve.json
    python scripts/run_hj.py critical-value --config config/runs/divergent_critical.json --threads 4
"""

import sys
from pathlib import Path

# Add hj-sdk to path
repo_root = Path(__file__).resolve().parent.parent
sdk_dir = repo_root / "hj-sdk"
if str(sdk_dir) not in sys.path:
    sys.path.insert(0, str(sdk_dir))

from contact_hj.cli import main


if __name__ == "__main__":
    sys.exit(main())
