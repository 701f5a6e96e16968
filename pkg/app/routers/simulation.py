"""下行仿真路由"""
from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool
from loguru import logger

from app.config import settings
from app.models import Scenario, SimulateRequest, SimulateResponse
from app.services.link_budget_service import LinkBudgetService
from app.services.scene_service import apply_overrides, paper_default_scenario

router = APIRouter(prefix="/v1", tags=["下行仿真"])
link_budget_service = LinkBudgetService(max_workers=settings.trace_workers)


@router.post("/simulate", response_model=SimulateResponse)
async def simulate(request: SimulateRequest):
    """射线追踪并计算每条下行链路的 SNR / BER / 容量"""
    try:
        scenario = apply_overrides(
            request.scenario or paper_default_scenario(),
            receiver_kind=request.receiver_kind,
            max_reflection_order=request.max_reflection_order,
            interference=request.interference,
            first_order_resolution_m=request.first_order_resolution_m,
            second_order_resolution_m=request.second_order_resolution_m,
        )
        links = await run_in_threadpool(link_budget_service.evaluate_downlink, scenario)
        return SimulateResponse(
            scenario=scenario.name,
            receiver_kind=scenario.receivers[0].kind,
            links=links,
            peak_capacity_bps=max((item.capacity_bps for item in links), default=0.0),
        )
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"下行仿真失败: {str(e)}")
        raise HTTPException(status_code=500, detail=f"下行仿真失败: {str(e)}")


@router.get("/scenario/builtin", response_model=Scenario)
async def builtin_scenario():
    """内置场景"""
    return paper_default_scenario()
