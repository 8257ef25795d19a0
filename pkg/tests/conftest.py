import pytest

from levilab.correction import CorrectionConfig, build_exterior, build_interior
from levilab.domain import get_domain, sample_boundary


@pytest.fixture(scope="session")
def skewed_build():
    """skewed-egg2 corrected at eps = 0.05 on 2000 boundary samples."""
    spec = get_domain("skewed-egg2")
    B = sample_boundary(spec, 2000, seed=0)
    r1, ledger = build_interior(spec, 0.05, CorrectionConfig(eps=0.05), boundary=B)
    return spec, B, r1, build_exterior(ledger), ledger


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
