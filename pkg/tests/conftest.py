import sys

import pytest

from fairts.domain import ResourceConfig, Task
from fairts.env import EnvConfig


@pytest.fixture
def default_res():
    return ResourceConfig((5, 10), 10)


@pytest.fixture
def env_config():
    return EnvConfig()


def make_task(id, arrival=0, length=1, overhead=0, demand=(1, 1), bw=1):
    return Task(id=id, arrival=arrival, length=length, overhead=overhead,
                demand=demand, bw_demand=bw)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
