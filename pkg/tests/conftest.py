import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def bz():
    from noisecert.dynamics import make_bz_map

    return make_bz_map()


@pytest.fixture(scope="session")
def doubling():
    from noisecert.dynamics import make_doubling_map

    return make_doubling_map()


# -- acceptance summary ------------------------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """``record(key, ok, detail)`` stores one acceptance line for the terminal summary."""

    def _record(key: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE[key] = (bool(ok), detail)
        return bool(ok)

    return _record


def _key(k: str):
    num = "".join(ch for ch in k if ch.isdigit())
    return (int(num or 0), k)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=_key):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
