import warnings

import pytest

from ablab.experiments import TwoSlitConfig, run_two_slit

# compact apparatus: about two seconds per run, still several fringes on screen
SMALL = TwoSlitConfig(
    nx=160, ny=128, barrier_x=90, slit_separation=24.0, slit_width=4, screen_x=40,
    packet_x=128.0, packet_width=5.0, steps=600, sponge_width=8,
)

SMALL_CONFIG_TEXT = """\
# compact apparatus
nx = 160
ny = 128
barrier_x = 90
slit_separation = 24
slit_width = 4
screen_x = 40
packet_x = 128
packet_width = 5
steps = 600
sponge_width = 8
"""


class RunCache:
    def __init__(self):
        self._store = {}

    def __call__(self, config):
        if config not in self._store:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                self._store[config] = run_two_slit(config)
        return self._store[config]


@pytest.fixture(scope="session")
def runs():
    """Memoised run_two_slit shared by every test in the session."""
    return RunCache()


# --- acceptance summary: one line per criterion ---------------------------------------

_CRITERIA = {}
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    prev_ok, details = _CRITERIA.get(number, (True, []))
    details = details + [str(v) for k, v in item.user_properties if k == "detail" and str(v) not in details]
    _CRITERIA[number] = (prev_ok and report.passed, details)
    _TITLES[number] = title


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, details = _CRITERIA[number]
        extra = f" ({'; '.join(details)})" if details else ""
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {_TITLES[number]}{extra}")
