"""PON 波长分配路由"""
from fastapi import APIRouter, HTTPException
from loguru import logger

from app.models import AssignRequest, AssignResponse, ValidateRequest, ValidateResponse
from app.services.pon_service import (
    assign_wavelengths,
    infer_assignment,
    paper_default_topology,
    validate_assignment,
)

router = APIRouter(prefix="/v1/pon", tags=["PON"])


@router.post("/assign", response_model=AssignResponse)
async def assign(request: AssignRequest):
    """求解全互连波长分配并附带校验结果"""
    try:
        topology = request.topology or paper_default_topology()
        assignment = assign_wavelengths(topology)
        return AssignResponse(assignment=assignment, violations=validate_assignment(assignment, topology))
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"波长分配失败: {str(e)}")
        raise HTTPException(status_code=500, detail=f"波长分配失败: {str(e)}")


@router.post("/validate", response_model=ValidateResponse)
async def validate(request: ValidateRequest):
    """校验波长分配（完整分配或波长矩阵）"""
    try:
        topology = request.topology or paper_default_topology()
        assignment = request.assignment or infer_assignment(request.matrix, topology)
        violations = validate_assignment(assignment, topology)
        return ValidateResponse(valid=not violations, violations=violations)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"波长分配校验失败: {str(e)}")
        raise HTTPException(status_code=500, detail=f"波长分配校验失败: {str(e)}")
