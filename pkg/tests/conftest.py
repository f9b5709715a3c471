import sys

import numpy as np
import pytest

from pmsm_gp.config import load_config
from pmsm_gp.sim import build_bank, closed_loop_matrices


@pytest.fixture(scope="session")
def paper_cfg():
    return load_config("paper.toml")


@pytest.fixture(scope="session")
def paper_bank(paper_cfg):
    return build_bank(paper_cfg)


@pytest.fixture(scope="session")
def paper_cl(paper_cfg):
    return closed_loop_matrices(paper_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
