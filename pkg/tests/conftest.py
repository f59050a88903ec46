import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("kbm", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("kbm")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


def record_criterion(n: int, part: str, ok: bool, detail: str = "") -> None:
    CRITERIA.setdefault(n, []).append((part, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        parts = CRITERIA[n]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {'ok' if ok else 'FAIL'} {d}".rstrip() for p, ok, d in parts)
        tr.write_line(f"criterion {n:2d}: {status}  {detail}")
