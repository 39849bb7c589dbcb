from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def searcher_nt() -> str:
    return (DATA / "searcher" / "fixture.nt").read_text("utf-8")


@pytest.fixture(scope="session")
def pipeline_nt(searcher_nt) -> str:
    return searcher_nt + (DATA / "pipeline" / "batman.nt").read_text("utf-8")


@pytest.fixture
def sparql_server(searcher_nt):
    from placeorigin.testing import MockSparqlServer

    with MockSparqlServer(ntriples=searcher_nt) as srv:
        yield srv


# --- acceptance reporting ----------------------------------------------------

_CRITERIA: dict[str, tuple[bool, str]] = {}


class Criterion:
    """Collects checks for one acceptance criterion and records a single verdict line."""

    def __init__(self, name: str):
        self.name = name
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, ok: bool, what: str) -> None:
        (self.notes if ok else self.failures).append(what)

    def finish(self) -> None:
        ok = not self.failures
        detail = "; ".join(self.failures if not ok else self.notes)
        _CRITERIA[self.name] = (ok, detail)
        print(f"[{'PASS' if ok else 'FAIL'}] {self.name}: {detail}")
        assert ok, detail


@pytest.fixture
def criterion(request):
    return Criterion(request.node.name.removeprefix("test_"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in _CRITERIA.items():
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
