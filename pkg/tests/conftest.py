"""共享测试夹具：内置场景的射线追踪结果只计算一次"""
from pathlib import Path

import pytest

from app.models import ReceiverKind
from app.services.channel_service import ChannelService
from app.services.link_budget_service import LinkBudgetService
from app.services.scene_service import apply_overrides, paper_default_scenario

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def adr_scenario():
    return apply_overrides(paper_default_scenario(), receiver_kind=ReceiverKind.ADR)


@pytest.fixture(scope="session")
def wfov_scenario():
    return apply_overrides(paper_default_scenario(), receiver_kind=ReceiverKind.WFOV)


@pytest.fixture(scope="session")
def adr_channel(adr_scenario):
    return ChannelService(adr_scenario, max_workers=4)


@pytest.fixture(scope="session")
def wfov_channel(wfov_scenario):
    return ChannelService(wfov_scenario, max_workers=4)


@pytest.fixture(scope="session")
def adr_matrix(adr_channel):
    return adr_channel.receiver_power_matrix()


@pytest.fixture(scope="session")
def wfov_matrix(wfov_channel):
    return wfov_channel.receiver_power_matrix()


@pytest.fixture(scope="session")
def adr_budgets(adr_scenario, adr_channel, adr_matrix):
    return LinkBudgetService().evaluate_downlink(adr_scenario, matrix=adr_matrix, channel=adr_channel)


@pytest.fixture(scope="session")
def wfov_budgets(wfov_scenario, wfov_channel, wfov_matrix):
    return LinkBudgetService().evaluate_downlink(wfov_scenario, matrix=wfov_matrix, channel=wfov_channel)
