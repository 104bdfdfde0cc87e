import numpy as np
import pytest

from dialshape.ontology import Ontology, default_ontology


@pytest.fixture(scope="session")
def onto():
    return default_ontology()


@pytest.fixture
def tiny_onto():
    """Two constraint slots, one request slot, three venues; (b, y) has no venue."""
    return Ontology(
        constraint_slots=(("colour", ("r", "g", "b")), ("size", ("x", "y"))),
        request_slots=("phone",),
        venues=(
            {"colour": "r", "size": "x", "phone": "1"},
            {"colour": "g", "size": "y", "phone": "2"},
            {"colour": "b", "size": "x", "phone": "3"},
        ),
        max_turns=10,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def verdict(request, capsys):
    """Print and remember one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


_VERDICTS = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
