import pytest

from kernelbounds.core import ExponentSet, Window
from kernelbounds.kernels import builtin, lift

SWEEP_EXPONENTS = [(2.0, 4.0 / 3.0), (2.0, 1.5), (3.0, 2.0)]


def sweep_kernels():
    return [lift(builtin("constant")), builtin("log_ratio"),
            builtin("power_diff", alpha=0.5), builtin("power_diff", alpha=1.0)]


@pytest.fixture
def unit_window():
    return Window(0.0, 1.0)


@pytest.fixture
def hardy_exps():
    return ExponentSet(2.0, 4.0 / 3.0)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record ``PASS``/``FAIL`` for one acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
