import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from _helpers import ACCEPTANCE_LINES  # noqa: E402

# Field-level examples build grids; keep the example count modest and
# turn off the wall-clock deadline.
settings.register_profile("lab", max_examples=25, deadline=None)
settings.load_profile("lab")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
