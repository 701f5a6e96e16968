"""信道服务模块 - 视距与二阶以内漫反射的射线追踪"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.errors import ConfigurationError, GeometryError, NoSignalError
from app.models import (
    Detector,
    Emitter,
    ImpulseResponse,
    OwcWavelength,
    PathContribution,
    PathSummary,
    Scenario,
    SurfaceElement,
)
from app.services.scene_service import SurfaceMesh, receiver_detectors, resolve_targets, room_mesh

SPEED_OF_LIGHT = 299_792_458.0
LARGE_MESH_WARNING = 100_000

MatrixKey = Tuple[int, int, int, int]
Elements = Union[SurfaceMesh, Sequence[SurfaceElement]]


def _as_mesh(elements: Optional[Elements]) -> Optional[SurfaceMesh]:
    if elements is None or isinstance(elements, SurfaceMesh):
        return elements
    return SurfaceMesh.from_elements(elements)


def lambertian_gain(order: float, cos_emit, area, cos_incident, distance):
    """广义朗伯源到接收面的功率增益 (n+1)/(2π)·cosⁿφ·A·cosθ/d²"""
    return (order + 1.0) / (2.0 * math.pi) * np.power(cos_emit, order) * area * cos_incident / distance ** 2


def los_gain(emitter: Emitter, detector: Detector) -> float:
    """视距增益；入射角超出 FOV 或发射角超过 90° 时为 0"""
    source = emitter.position.to_array()
    target = detector.position.to_array()
    offset = target - source
    distance = float(np.linalg.norm(offset))
    if distance == 0.0:
        raise GeometryError("发射机与接收机位置重合")
    cos_emit = float(np.dot(emitter.direction.to_array(), offset)) / distance
    cos_incident = float(np.dot(detector.normal.to_array(), -offset)) / distance
    if cos_emit <= 0.0 or cos_incident <= 0.0:
        return 0.0
    if cos_incident < math.cos(math.radians(detector.fov_deg)):
        return 0.0
    return float(lambertian_gain(emitter.lambertian_order, cos_emit, detector.area_m2, cos_incident, distance))


def incident_power(emitter: Emitter, mesh: Elements) -> np.ndarray:
    """发射源照到每个反射单元上的功率 (W)"""
    mesh = _as_mesh(mesh)
    offset = mesh.centers - emitter.position.to_array()
    distance = np.linalg.norm(offset, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_emit = offset @ emitter.direction.to_array() / distance
        cos_incident = -np.einsum("ij,ij->i", mesh.normals, offset) / distance
        gain = lambertian_gain(emitter.lambertian_order, np.clip(cos_emit, 0.0, None), mesh.areas, cos_incident, distance)
    valid = (distance > 0) & (cos_emit > 0) & (cos_incident > 0)
    return np.where(valid, gain, 0.0) * emitter.power_w


def _collection(mesh: SurfaceMesh, detector: Detector) -> Tuple[np.ndarray, np.ndarray]:
    """各反射单元作为 n=1 朗伯源到探测器的增益与距离"""
    offset = detector.position.to_array() - mesh.centers
    distance = np.linalg.norm(offset, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_emit = np.einsum("ij,ij->i", mesh.normals, offset) / distance
        cos_incident = -(offset @ detector.normal.to_array()) / distance
        gain = lambertian_gain(1.0, cos_emit, detector.area_m2, cos_incident, distance)
    valid = (
        (distance > 0)
        & (cos_emit > 0)
        & (cos_incident > 0)
        & (cos_incident >= math.cos(math.radians(detector.fov_deg)))
    )
    return np.where(valid, gain, 0.0), distance


@dataclass
class PathSet:
    """未分箱的路径列表：LOS、每个一阶单元、每个有序二阶单元对各一条"""

    orders: np.ndarray
    delays_s: np.ndarray
    powers_w: np.ndarray

    def __len__(self) -> int:
        return int(self.powers_w.shape[0])

    @property
    def total_power_w(self) -> float:
        return float(np.sum(self.powers_w))

    def power_by_order(self, order: int) -> float:
        return float(np.sum(self.powers_w[self.orders == order]))

    def contributions(self, include_zero: bool = False) -> List[PathContribution]:
        return [
            PathContribution(order=int(o), delay_s=float(d), power_w=float(p))
            for o, d, p in zip(self.orders, self.delays_s, self.powers_w)
            if include_zero or p > 0
        ]


def trace_paths(
    emitter: Emitter,
    detector: Detector,
    elements: Optional[Elements],
    max_order: int,
    second_order_elements: Optional[Elements] = None,
) -> PathSet:
    """枚举全部路径（含功率为 0 者），单元贡献按固定顺序排列"""
    if max_order not in (0, 1, 2):
        raise ConfigurationError(f"最大反射阶数必须为 0、1 或 2: {max_order}")
    first = _as_mesh(elements)
    if max_order >= 1 and (first is None or len(first) == 0):
        raise ConfigurationError("反射阶数 ≥ 1 时反射单元列表不能为空")

    source = emitter.position.to_array()
    target = detector.position.to_array()
    orders = [np.zeros(1, dtype=int)]
    delays = [np.array([np.linalg.norm(target - source) / SPEED_OF_LIGHT])]
    powers = [np.array([emitter.power_w * los_gain(emitter, detector)])]

    if max_order >= 1:
        incident = incident_power(emitter, first)
        gain, out_distance = _collection(first, detector)
        in_distance = np.linalg.norm(first.centers - source, axis=1)
        orders.append(np.ones(len(first), dtype=int))
        delays.append((in_distance + out_distance) / SPEED_OF_LIGHT)
        powers.append(first.reflectances * incident * gain)

    if max_order >= 2:
        second = _as_mesh(second_order_elements) if second_order_elements is not None else first
        if len(second) == 0:
            raise ConfigurationError("二阶反射单元列表不能为空")
        coupling, distances = second.coupling()
        emitted = second.reflectances * incident_power(emitter, second)
        gain, out_distance = _collection(second, detector)
        collected = second.reflectances * gain
        in_distance = np.linalg.norm(second.centers - source, axis=1)
        pair_power = emitted[:, np.newaxis] * coupling * collected[np.newaxis, :]
        pair_delay = (in_distance[:, np.newaxis] + distances + out_distance[np.newaxis, :]) / SPEED_OF_LIGHT
        orders.append(np.full(pair_power.size, 2, dtype=int))
        delays.append(pair_delay.ravel())
        powers.append(pair_power.ravel())

    return PathSet(
        orders=np.concatenate(orders),
        delays_s=np.concatenate(delays),
        powers_w=np.concatenate(powers),
    )


def bin_paths(paths: PathSet, bin_width_s: float) -> ImpulseResponse:
    """按到达时间分箱，箱起点为 floor(t / w)·w，时间原点 0"""
    if not bin_width_s > 0:
        raise ConfigurationError(f"时间箱宽度必须为正: {bin_width_s}")
    index = np.floor(paths.delays_s / bin_width_s).astype(np.int64)
    bins = np.bincount(index, weights=paths.powers_w, minlength=int(index.max()) + 1)
    return ImpulseResponse(bin_width_s=bin_width_s, origin_s=0.0, bins=bins.tolist())


def impulse_response(
    emitter: Emitter,
    detector: Detector,
    elements: Optional[Elements],
    max_order: int,
    bin_width_s: float,
    second_order_elements: Optional[Elements] = None,
) -> ImpulseResponse:
    """LOS 与 max_order 阶以内漫反射累加而成的冲激响应"""
    return bin_paths(trace_paths(emitter, detector, elements, max_order, second_order_elements), bin_width_s)


def _rms_spread(times: np.ndarray, powers: np.ndarray) -> float:
    total = math.fsum(powers.tolist())
    if total <= 0.0:
        raise NoSignalError("接收总功率为 0，时延扩展无定义")
    mean = math.fsum((powers * times).tolist()) / total
    variance = math.fsum((powers * (times - mean) ** 2).tolist()) / total
    return math.sqrt(max(variance, 0.0))


def delay_spread(h: ImpulseResponse) -> float:
    """RMS 时延扩展 (s)，以各箱起点为到达时间"""
    return _rms_spread(np.array(h.times_s), np.array(h.bins))


def delay_spread_of_paths(paths: PathSet) -> float:
    """基于未分箱路径的 RMS 时延扩展"""
    return _rms_spread(paths.delays_s, paths.powers_w)


class ChannelService:
    """场景级信道计算：每个 (ADT, 支路, 接收机, 接收支路) 的功率矩阵"""

    def __init__(self, scenario: Scenario, max_workers: int = 1):
        self.scenario = scenario
        self.max_workers = max(1, max_workers)
        room = scenario.room
        self.max_order = scenario.controls.max_reflection_order
        self.bin_width_s = scenario.controls.time_bin_s
        self.first_mesh: Optional[SurfaceMesh] = None
        self.second_mesh: Optional[SurfaceMesh] = None
        if self.max_order >= 1:
            self.first_mesh = room_mesh(room.dims, room.reflectances, room.first_order_resolution_m)
            if len(self.first_mesh) > LARGE_MESH_WARNING:
                logger.warning(f"一阶反射单元数较多 ({len(self.first_mesh)})，追踪耗时将显著增加")
        if self.max_order >= 2:
            self.second_mesh = room_mesh(room.dims, room.reflectances, room.second_order_resolution_m)
            self.second_mesh.coupling()
        self.targets = resolve_targets(scenario)
        self.detectors = [receiver_detectors(rx, scenario.transmitters) for rx in scenario.receivers]

    def emitter(self, transmitter: int, branch: int) -> Emitter:
        tx = self.scenario.transmitters[transmitter]
        return Emitter.from_branch(tx.position, tx.branches[branch])

    def trace(self, key: MatrixKey) -> PathSet:
        t, b, r, rb = key
        return trace_paths(self.emitter(t, b), self.detectors[r][rb], self.first_mesh, self.max_order, self.second_mesh)

    def impulse_response(self, key: MatrixKey) -> ImpulseResponse:
        return bin_paths(self.trace(key), self.bin_width_s)

    def keys(self) -> List[MatrixKey]:
        return [
            (t, b, r, rb)
            for t, tx in enumerate(self.scenario.transmitters)
            for b in range(len(tx.branches))
            for r in range(len(self.scenario.receivers))
            for rb in range(len(self.detectors[r]))
        ]

    def _summarize(self, key: MatrixKey) -> PathSummary:
        t, b, r, rb = key
        paths = self.trace(key)
        total = paths.total_power_w
        spread = None
        if total > 0:
            spread = delay_spread(bin_paths(paths, self.bin_width_s))
        return PathSummary(
            transmitter=t,
            branch=b,
            receiver=r,
            receiver_branch=rb,
            wavelength=self.scenario.transmitters[t].branches[b].wavelength,
            power_w=total,
            los_power_w=paths.power_by_order(0),
            delay_spread_s=spread,
            is_target=self.targets.get((t, b)) == r,
        )

    def receiver_power_matrix(self) -> Dict[MatrixKey, PathSummary]:
        """全部组合的接收功率；并行计算后按固定键顺序归并"""
        keys = self.keys()
        logger.info(f"开始射线追踪: {len(keys)} 个组合, 最大反射阶数 {self.max_order}, 线程数 {self.max_workers}")
        if self.max_workers == 1:
            summaries = [self._summarize(key) for key in keys]
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                summaries = list(executor.map(self._summarize, keys))
        logger.info("射线追踪完成")
        return dict(zip(keys, summaries))


def receiver_power_matrix(scenario: Scenario, max_workers: int = 1) -> Dict[MatrixKey, PathSummary]:
    return ChannelService(scenario, max_workers=max_workers).receiver_power_matrix()


def foreign_power(
    matrix: Dict[MatrixKey, PathSummary],
    transmitter: int,
    wavelength: OwcWavelength,
    receiver: int,
    receiver_branch: int,
) -> float:
    """其它 ADT 在同一波长上落到该接收支路的功率（串扰）"""
    return math.fsum(
        summary.power_w
        for (t, _, r, rb), summary in matrix.items()
        if t != transmitter and r == receiver and rb == receiver_branch and summary.wavelength == wavelength
    )
