#!/usr/bin/env python3
"""Validate a RunConfig YAML file before handing it to `evolve --config`."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "backend", "evolution"))

from evolution_errors import ConfigError  # noqa: E402
from run_config import RunConfig  # noqa: E402
from system_instances import build_system  # noqa: E402


def validate(path):
    """Return a list of problems found in the config file; empty when it is usable."""
    issues = []
    try:
        config = RunConfig.from_yaml(path).validate()
    except ConfigError as e:
        return [e.message]

    # The system parameters only fail when the system is instantiated
    try:
        build_system(config.system, config.system_params, config.node_cap)
    except ConfigError as e:
        issues.append(f"System parameters rejected: {e.message}")

    if config.depth > 8:
        issues.append(f"depth {config.depth} makes confluence searches very slow")
    return issues


def main(argv=None):
    """Validate every config file given on the command line."""
    paths = (argv if argv is not None else sys.argv[1:]) or ["evolve.yaml"]
    print("Validating evolve run configuration...")

    failed = 0
    for path in paths:
        issues = validate(path)
        if issues:
            failed += 1
            print(f"{path}:")
            print("\n".join(f"  {issue}" for issue in issues))
        else:
            print(f"{path}: OK")

    if failed:
        print(f"\nFound problems in {failed} of {len(paths)} files")
        return 1
    print("All configuration checks passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
