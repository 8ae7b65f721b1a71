import pytest

from flashtrace import FlashChip, FlashGeometry, LatencyModel, MtdDevice

# A small chip keeps property tests fast; pages_per_block must stay a
# multiple of 32.
SMALL = FlashGeometry(blocks_per_chip=16, pages_per_block=32, page_size=512)

# The acceptance tests queue one verdict line each; flushing them
# through the terminal reporter sidesteps output capture, so the lines
# show up in the normal pytest output for passing tests too.  The
# reporter is looked up lazily because it registers after conftest
# configuration runs.
_verdict_queue: list[str] = []
_pytest_config = None


def queue_verdict(line: str) -> None:
    _verdict_queue.append(line)


def pytest_configure(config):
    global _pytest_config
    _pytest_config = config


@pytest.hookimpl(trylast=True)
def pytest_runtest_logreport(report):
    if report.when != "call" or not _verdict_queue:
        return
    reporter = None
    if _pytest_config is not None:
        reporter = _pytest_config.pluginmanager.get_plugin("terminalreporter")
    while _verdict_queue:
        line = _verdict_queue.pop(0)
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)


@pytest.fixture
def small_chip():
    return FlashChip(SMALL)

@pytest.fixture
def small_dev(small_chip):
    return MtdDevice(small_chip)


@pytest.fixture
def dev400():
    """Default chip with one 400-block partition, the common test rig."""
    dev = MtdDevice(FlashChip())
    dev.add_partition(0, 400, "p0")
    return dev


def make_dev400():
    dev = MtdDevice(FlashChip())
    dev.add_partition(0, 400, "p0")
    return dev
