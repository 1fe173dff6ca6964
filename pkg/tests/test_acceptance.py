"""Acceptance gate: every criterion runs at its stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see one pass/fail
line per criterion, or ``feemech suite`` for the same battery from the
command line.
"""

import os
import time

import pytest

from feemech.acceptance import CRITERIA

JOBS = int(os.environ.get("FEEMECH_JOBS", "1"))


@pytest.mark.parametrize("name,func", CRITERIA, ids=[name for name, _ in CRITERIA])
def test_criterion(name, func):
    start = time.perf_counter()
    try:
        if name == "theorem-suite":
            detail = func(jobs=JOBS)
        else:
            detail = func()
    except AssertionError as exc:
        print(f"FAIL {name} ({time.perf_counter() - start:.2f}s): {exc}")
        raise
    print(f"PASS {name} ({time.perf_counter() - start:.2f}s): {detail}")
