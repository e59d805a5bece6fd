#!/usr/bin/env python3
"""
Environment setup script for the contact-geometric PMP solver.

Copies env.example to .env and prints the resulting configuration along
with any problems validate_configuration() reports.
"""

import shutil
import sys
from pathlib import Path


def setup_environment() -> int:
    """Set up the environment configuration file."""
    print("Contact PMP solver - environment setup")
    print("=" * 40)

    env_file = Path(".env")
    example_file = Path("env.example")

    if env_file.exists():
        response = input(".env already exists. Overwrite it? (y/N): ").lower()
        if response != 'y':
            print("Setup cancelled. Your existing .env file is preserved.")
            return 0

    if not example_file.exists():
        print("env.example not found")
        return 1
    shutil.copy2(example_file, env_file)
    print("Created .env from env.example\n")

    for line in env_file.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith('#') and '=' in line:
            key, value = line.split('=', 1)
            print(f"  {key}: {value}")

    sys.path.insert(0, str(Path(__file__).parent))
    from utils.settings import validate_configuration

    problems = validate_configuration()
    if problems:
        print("\nConfiguration problems:")
        for problem in problems:
            print(f"  - {problem}")
        return 1

    print("\nNext steps:")
    print("1. Run the invariant suites: python app.py verify")
    print("2. Solve a built-in problem: python app.py solve --problem double_integrator_min_time")
    return 0


if __name__ == "__main__":
    sys.exit(setup_environment())
