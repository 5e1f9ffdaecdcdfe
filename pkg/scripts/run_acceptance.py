#!/usr/bin/env python3
"""Run the acceptance suite and print its PASS/FAIL lines (exit status follows pytest)."""
import sys
from pathlib import Path

import pytest

if __name__ == "__main__":
    suite = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.exit(pytest.main([str(suite), "-q", *sys.argv[1:]]))
