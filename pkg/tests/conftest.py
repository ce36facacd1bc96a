import os

from hypothesis import HealthCheck, settings

settings.register_profile('default', max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile('thorough', max_examples=500, deadline=None)
settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'default'))

import time

import pytest

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line('markers', 'acceptance(number, name): one acceptance criterion')


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(('wall', time.perf_counter() - start))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker('acceptance')
    if mark is None or report.when not in ('setup', 'call'):
        return
    if report.when == 'setup' and report.passed:
        return
    props = dict(item.user_properties)
    wall = props.get('timed', props.get('wall', 0.0))
    _acceptance[mark.args[0]] = (mark.args[1], report.passed, wall)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section('acceptance criteria')
    for number in sorted(_acceptance):
        name, ok, wall = _acceptance[number]
        terminalreporter.write_line(
            f'ACCEPTANCE {number} {name}: {"PASS" if ok else "FAIL"} ({wall:.2f} s)')
