#!/usr/bin/env python3
"""
Validate run configurations.

Checks:
- Every config under config/runs/ parses (JSON/YAML)
- Strict schema: no unknown keys, tolerances positive
- Stability gate lambda*dt <= 0.5 and window_radius <= n/2
- Warns about settings that make runs slow (long horizons at small dt)
"""

import sys
from pathlib import Path

# Add hj-sdk to path
repo_root = Path(__file__).resolve().parent.parent
sdk_dir = repo_root / "hj-sdk"
if str(sdk_dir) not in sys.path:
    sys.path.insert(0, str(sdk_dir))

from contact_hj.config import load_config
from contact_hj.errors import ConfigValidationError

SLOW_STEPS = 20_000


def check_config(path: Path) -> tuple[list[str], list[str]]:
    """Return (errors, warnings) for one config file."""
    errors, warnings = [], []
    try:
        config = load_config(path)
    except ConfigValidationError as e:
        errors.append(str(e))
        return errors, warnings

    for section in ("critical", "longtime"):
        horizon = getattr(config, section).horizon
        steps = horizon / config.dt_for(section)
        if steps > SLOW_STEPS:
            warnings.append(f"{section}: {steps:.0f} steps (horizon {horizon:g}, dt {config.dt_for(section):g})")
    if config.time.T / config.time.dt > SLOW_STEPS:
        warnings.append(f"time: {config.time.T / config.time.dt:.0f} steps")
    return errors, warnings


def main() -> int:
    """Main validation function."""
    print("Validating run configurations...\n")

    runs_dir = repo_root / "config" / "runs"
    paths = sorted(list(runs_dir.glob("*.json")) + list(runs_dir.glob("*.yaml")))
    if not paths:
        print("No run configurations found")
        return 1

    all_errors = []
    all_warnings = []
    for path in paths:
        print(f"Validating: {path.name}")
        errors, warnings = check_config(path)
        all_errors.extend(f"{path.name}: {e}" for e in errors)
        all_warnings.extend(f"{path.name}: {w}" for w in warnings)
        print("   invalid" if errors else "   valid")

    print()
    print("=" * 60)
    print("Validation Summary")
    print("=" * 60)
    if all_warnings:
        print(f"\nWarnings ({len(all_warnings)}):")
        for warning in all_warnings:
            print(f"   - {warning}")
    if all_errors:
        print(f"\nErrors ({len(all_errors)}):")
        for error in all_errors:
            print(f"   - {error}")
        print("\nValidation failed")
        return 1

    print(f"\nAll {len(paths)} configurations valid")
    return 0


if __name__ == "__main__":
    sys.exit(main())
