"""链路预算服务模块 - 噪声、信噪比、误码率与信道容量"""
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.special import erfc

from app.errors import DomainError, InfiniteSnrError
from app.models import LinkBudget, NoiseBreakdown, OwcWavelength, PathSummary, ReceiverKind, Scenario
from app.services.channel_service import ChannelService, MatrixKey, foreign_power
from app.services.scene_service import uncovered_targets

Q_ELECTRON = 1.602176634e-19


def noise_variance(
    received_power_w: float,
    background_power_w: float,
    responsivity_a_w: float,
    bandwidth_hz: float,
    preamp_density: float,
) -> NoiseBreakdown:
    """前放噪声、背景散粒噪声与信号散粒噪声之和"""
    inputs = {
        "接收功率": received_power_w,
        "背景功率": background_power_w,
        "响应度": responsivity_a_w,
        "前放噪声谱密度": preamp_density,
    }
    for label, value in inputs.items():
        if value < 0:
            raise DomainError(f"{label}不能为负: {value}")
    if bandwidth_hz <= 0:
        raise DomainError(f"带宽必须为正: {bandwidth_hz}")

    preamp = preamp_density ** 2 * bandwidth_hz
    background = 2.0 * Q_ELECTRON * responsivity_a_w * background_power_w * bandwidth_hz
    signal = 2.0 * Q_ELECTRON * responsivity_a_w * received_power_w * bandwidth_hz
    return NoiseBreakdown(
        preamp_a2=preamp,
        background_a2=background,
        signal_a2=signal,
        total_a2=preamp + background + signal,
    )


def snr(responsivity_a_w: float, ps1_w: float, ps0_w: float, total_noise_a2: float) -> float:
    """SNR = R²(Ps1 − Ps0)² / σ_t²"""
    if total_noise_a2 == 0:
        raise InfiniteSnrError("总噪声方差为 0，信噪比无界")
    if total_noise_a2 < 0:
        raise DomainError(f"噪声方差不能为负: {total_noise_a2}")
    return responsivity_a_w ** 2 * (ps1_w - ps0_w) ** 2 / total_noise_a2


def ber(snr_value: float) -> float:
    """OOK 误码率 Q(√SNR) = ½·erfc(√(SNR/2))"""
    if snr_value < 0:
        raise DomainError(f"信噪比不能为负: {snr_value}")
    return float(0.5 * erfc(math.sqrt(snr_value / 2.0)))


def capacity(bandwidth_hz: float, snr_value: float) -> float:
    """香农容量 B·log₂(1 + SNR)"""
    if bandwidth_hz <= 0:
        raise DomainError(f"带宽必须为正: {bandwidth_hz}")
    if snr_value < 0:
        raise DomainError(f"信噪比不能为负: {snr_value}")
    return float(bandwidth_hz * np.log2(1.0 + snr_value))


def select_branch(budgets: Sequence[LinkBudget]) -> LinkBudget:
    """选择 SNR 最大的 ADR 支路；并列时取序号最小者"""
    if not budgets:
        raise DomainError("ADR 支路列表为空")
    best = budgets[0]
    for candidate in budgets[1:]:
        if candidate.snr > best.snr:
            best = candidate
    return best


def link_budget(
    summary: PathSummary,
    responsivity_a_w: float,
    bandwidth_hz: float,
    preamp_density: float,
    background_power_w: float,
    interference_power_w: float = 0.0,
    include_interference: bool = False,
) -> LinkBudget:
    """由单个接收支路的功率汇总计算链路预算；OOK 取 Ps1 = 2·P̄, Ps0 = 0"""
    received = summary.power_w
    noise_background = background_power_w + (interference_power_w if include_interference else 0.0)
    noise = noise_variance(received, noise_background, responsivity_a_w, bandwidth_hz, preamp_density)
    ps1, ps0 = 2.0 * received, 0.0
    snr_value = snr(responsivity_a_w, ps1, ps0, noise.total_a2)
    return LinkBudget(
        transmitter=summary.transmitter,
        branch=summary.branch,
        receiver=summary.receiver,
        receiver_branch=summary.receiver_branch,
        wavelength=summary.wavelength,
        received_power_w=received,
        interference_power_w=interference_power_w,
        ps1_w=ps1,
        ps0_w=ps0,
        responsivity_a_w=responsivity_a_w,
        noise=noise,
        snr=snr_value,
        ber=ber(snr_value),
        capacity_bps=capacity(bandwidth_hz, snr_value),
        delay_spread_s=summary.delay_spread_s,
    )


class LinkBudgetService:
    """下行链路评估服务"""

    def __init__(self, max_workers: int = 1):
        self.max_workers = max_workers

    def evaluate_downlink(
        self,
        scenario: Scenario,
        matrix: Optional[Dict[MatrixKey, PathSummary]] = None,
        channel: Optional[ChannelService] = None,
    ) -> List[LinkBudget]:
        """每个 (ADT 支路, 目标接收机) 一条链路预算，按 (ADT, 支路) 排序"""
        try:
            channel = channel or ChannelService(scenario, max_workers=self.max_workers)
            if matrix is None:
                matrix = channel.receiver_power_matrix()
            include = scenario.controls.interference

            budgets: List[LinkBudget] = []
            for (t, b), r in channel.targets.items():
                receiver = scenario.receivers[r]
                cal = receiver.calibration
                wavelength: OwcWavelength = scenario.transmitters[t].branches[b].wavelength
                candidates = []
                for rb in range(len(channel.detectors[r])):
                    interference = foreign_power(matrix, t, wavelength, r, rb)
                    candidates.append(
                        link_budget(
                            matrix[(t, b, r, rb)],
                            responsivity_a_w=cal.responsivity_a_w,
                            bandwidth_hz=cal.bandwidth_hz,
                            preamp_density=cal.preamp_noise_density,
                            background_power_w=receiver.background_power_w,
                            interference_power_w=interference,
                            include_interference=include,
                        )
                    )
                budgets.append(select_branch(candidates) if receiver.kind is ReceiverKind.ADR else candidates[0])

            uncovered = uncovered_targets(scenario, channel.targets)
            if uncovered:
                logger.warning(f"{len(uncovered)} 条链路的目标接收机不在波束内: {uncovered}")
            peak = max((item.capacity_bps for item in budgets), default=0.0)
            logger.info(f"下行评估完成: {len(budgets)} 条链路, 峰值容量 {peak / 1e9:.3f} Gbit/s")
            return budgets
        except Exception as e:
            logger.error(f"下行评估失败: {str(e)}")
            raise
