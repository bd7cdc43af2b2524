import re
from pathlib import Path

import pytest

from toast.surface import parse

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str):
    return parse((CORPUS / name).read_text(encoding="utf-8"))


@pytest.fixture
def corpus():
    return load


_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    verdicts: dict[int, bool] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or rep.when not in ("call", "setup"):
                continue
            n = int(m.group(1))
            verdicts[n] = verdicts.get(n, True) and key == "passed"
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if verdicts[n] else 'FAIL'}")
