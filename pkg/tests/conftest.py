import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PYTHON_SRC = ROOT / "python"
for path in (PYTHON_SRC, ROOT):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))
