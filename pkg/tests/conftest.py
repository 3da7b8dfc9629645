import numpy as np
import pytest

from naelab.formula import CnfFormula, Mode


def random_formula(rng, n, k, m, mode=Mode.NAE):
    clauses = []
    for _ in range(m):
        vs = rng.choice(n, size=k, replace=False) + 1
        signs = rng.choice([-1, 1], size=k)
        clauses.append((vs * signs).tolist())
    return CnfFormula.from_lists(n, clauses, mode)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_verdict(label: str, name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  [{label}] {name}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_order):
            terminalreporter.write_line(line)


def _criterion_order(line):
    label = line.split("[", 1)[1].split("]", 1)[0]
    digits = "".join(ch for ch in label if ch.isdigit())
    return (int(digits or 0), label)
