"""
Command-line entry point for the contact-geometric PMP solver.

    python app.py solve --problem double_integrator_min_time --x0 1,0
    python app.py verify --suite pairing
    python app.py bench --out results
    python app.py list
"""

import sys
from pathlib import Path

# Add project root to Python path for imports
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from cli.commands import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
