import contextlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from darbouxlvn.scenarios import get_builtin

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])


@pytest.fixture
def criterion(request, capsys):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    store = request.config.stash[_ACCEPTANCE_KEY]

    @contextlib.contextmanager
    def record(number: int, title: str):
        info = {}
        try:
            yield info
        except BaseException as exc:
            line = f"criterion {number:2d} FAIL  {title}  [{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
            store[number] = line
            with capsys.disabled():
                print("\n" + line)
            raise
        detail = "  ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
        line = f"criterion {number:2d} PASS  {title}  {detail}".rstrip()
        store[number] = line
        with capsys.disabled():
            print("\n" + line)

    return record


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ex51_ctx():
    return get_builtin("ex51").context()


@pytest.fixture(scope="session")
def ex53_ctx():
    return get_builtin("ex53").context()


@pytest.fixture(scope="session")
def ex54_ctx():
    return get_builtin("ex54").context()


@pytest.fixture(scope="session")
def ex56_ctx():
    return get_builtin("ex56").context()
