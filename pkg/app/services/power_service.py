"""功耗服务模块 - spine-leaf 与 PON/OWC 架构功耗对比"""
import math
from typing import Dict, Optional, Tuple

from loguru import logger

from app.errors import DomainError
from app.models import PonOwcPowerParams, PowerReport, SpineLeafPowerParams


def spine_leaf_terms(params: SpineLeafPowerParams) -> Dict[str, float]:
    return {
        "spine": params.spine_w * params.spines,
        "leaf": params.leaf_w * params.leaves,
        "server_transceiver": params.server_transceiver_w * params.server_transceivers,
    }


def pon_owc_terms(params: PonOwcPowerParams) -> Dict[str, float]:
    return {
        "owc_transceiver": params.owc_transceiver_w * params.owc_transceivers,
        "olt": params.olt_w,
        "leaf": params.leaf_w * params.leaves,
        "server_transceiver": params.server_transceiver_w * params.server_transceivers,
    }


def spine_leaf_power(params: SpineLeafPowerParams) -> float:
    """P = Ps·Ns + Pl·Nl + Pcs·Ncs"""
    terms = spine_leaf_terms(params)
    return terms["spine"] + terms["leaf"] + terms["server_transceiver"]


def pon_owc_power(params: PonOwcPowerParams) -> float:
    """P = Po·No + K + Pl·Nl + Pc·Nc"""
    terms = pon_owc_terms(params)
    return terms["owc_transceiver"] + terms["olt"] + terms["leaf"] + terms["server_transceiver"]


def savings(p_baseline: float, p_proposed: float) -> float:
    """节省比例 1 − P_proposed / P_baseline"""
    if not math.isfinite(p_baseline) or p_baseline <= 0:
        raise DomainError(f"基准功耗必须为正: {p_baseline}")
    return 1.0 - p_proposed / p_baseline


def params_for_racks(
    racks: int,
    servers_per_rack: int,
    spines: int = 4,
    spine_w: float = 660.0,
    leaf_w: float = 508.0,
    server_transceiver_w: float = 3.0,
    owc_transceiver_w: float = 0.4,
    owc_transceivers: Optional[int] = None,
    olt_w: float = 480.0,
) -> Tuple[SpineLeafPowerParams, PonOwcPowerParams]:
    """由机架数推导计数：Nl = 机架数，Ncs = 机架数 × 每架服务器，No 缺省 = 2 × 机架数"""
    if racks < 0 or servers_per_rack < 0:
        raise DomainError(f"机架数与每架服务器数不能为负: {racks}, {servers_per_rack}")
    servers = racks * servers_per_rack
    baseline = SpineLeafPowerParams(
        spine_w=spine_w,
        spines=spines,
        leaf_w=leaf_w,
        leaves=racks,
        server_transceiver_w=server_transceiver_w,
        server_transceivers=servers,
    )
    proposed = PonOwcPowerParams(
        owc_transceiver_w=owc_transceiver_w,
        owc_transceivers=2 * racks if owc_transceivers is None else owc_transceivers,
        olt_w=olt_w,
        leaf_w=leaf_w,
        leaves=racks,
        server_transceiver_w=server_transceiver_w,
        server_transceivers=servers,
    )
    return baseline, proposed


def compare_power(spine_leaf: SpineLeafPowerParams, pon_owc: PonOwcPowerParams) -> PowerReport:
    """两种架构的总功耗、分项与节省比例"""
    baseline = spine_leaf_power(spine_leaf)
    proposed = pon_owc_power(pon_owc)
    report = PowerReport(
        baseline_w=baseline,
        proposed_w=proposed,
        savings=savings(baseline, proposed),
        baseline_terms=spine_leaf_terms(spine_leaf),
        proposed_terms=pon_owc_terms(pon_owc),
    )
    logger.info(f"功耗对比: 基准 {baseline} W, PON/OWC {proposed} W, 节省 {report.savings:.4f}")
    return report
