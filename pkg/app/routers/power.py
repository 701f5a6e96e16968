"""功耗对比路由"""
from fastapi import APIRouter, HTTPException
from loguru import logger

from app.models import PowerReport, PowerRequest
from app.services.power_service import compare_power

router = APIRouter(prefix="/v1", tags=["功耗"])


@router.post("/power", response_model=PowerReport)
async def power(request: PowerRequest):
    """spine-leaf 与 PON/OWC 架构功耗对比"""
    try:
        return compare_power(request.spine_leaf, request.pon_owc)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"功耗计算失败: {str(e)}")
        raise HTTPException(status_code=500, detail=f"功耗计算失败: {str(e)}")
