import os

import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# criterion number -> list of (ok, detail) from the acceptance tests
_RESULTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        _RESULTS.setdefault(number, []).append((bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"Criterion {number}: {'PASS' if ok else 'FAIL'}")
        for p, detail in parts:
            terminalreporter.write_line(f"    [{'ok' if p else 'FAIL'}] {detail}")
