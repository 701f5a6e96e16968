"""场景服务模块 - 机房几何、内置场景与场景文件"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.errors import ConfigurationError
from app.models import (
    AdtBranch,
    Detector,
    OwcWavelength,
    ReceiverCalibration,
    Receiver,
    ReceiverKind,
    Reflectances,
    Room,
    Scenario,
    SimulationControls,
    SurfaceElement,
    SurfaceName,
    Transmitter,
    Vec3,
)
from app.utils.geometry import angle_between_deg, unit

# 面 -> (固定坐标轴, 固定值取自 dims 的序号或 None 表示 0, 两个面内坐标轴, 内法向)
_SURFACES: Tuple[Tuple[SurfaceName, int, Optional[int], Tuple[int, int], Tuple[float, float, float]], ...] = (
    (SurfaceName.CEILING, 2, 2, (0, 1), (0.0, 0.0, -1.0)),
    (SurfaceName.FLOOR, 2, None, (0, 1), (0.0, 0.0, 1.0)),
    (SurfaceName.WEST, 0, None, (1, 2), (1.0, 0.0, 0.0)),
    (SurfaceName.EAST, 0, 0, (1, 2), (-1.0, 0.0, 0.0)),
    (SurfaceName.SOUTH, 1, None, (0, 2), (0.0, 1.0, 0.0)),
    (SurfaceName.NORTH, 1, 1, (0, 2), (0.0, -1.0, 0.0)),
)

DEFAULT_ADT_POSITIONS = ((4.0, 1.0, 3.0), (4.0, 3.0, 3.0), (4.0, 5.0, 3.0), (4.0, 7.0, 3.0))
DEFAULT_AZIMUTHS = (
    (167.0, 207.0, 231.0, 243.0),
    (90.0, 90.0, 270.0, 270.0),
    (90.0, 90.0, 90.0, 90.0),
    (124.0, 143.0, 180.0, 216.0),
)
DEFAULT_ELEVATIONS = (
    (19.0, 18.0, 13.0, 9.5),
    (18.5, 45.0, 45.0, 18.5),
    (10.0, 15.0, 31.0, 74.0),
    (11.0, 16.0, 20.0, 16.0),
)
DEFAULT_RECEIVER_POSITIONS = ((1.3, 1.6, 2.0), (4.0, 4.0, 2.0), (4.0, 6.3, 2.0), (1.3, 5.0, 2.0))

# 目标接收机偏离支路轴线超过 该倍数 × 半功率半角 即视为不在波束内
BEAM_COVERAGE_FACTOR = 2.0
# 二阶耦合矩阵为 N×N，单元数超过此值时提示内存与耗时
LARGE_COUPLING_WARNING = 5_000


@dataclass
class SurfaceMesh:
    """离散反射面的数组形式，供射线追踪向量化计算"""

    centers: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    reflectances: np.ndarray
    surfaces: List[SurfaceName] = field(default_factory=list)
    _coupling: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.areas.shape[0])

    @property
    def total_area(self) -> float:
        return math.fsum(self.areas.tolist())

    @classmethod
    def from_elements(cls, elements: Sequence[SurfaceElement]) -> "SurfaceMesh":
        if not elements:
            return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0))
        return cls(
            centers=np.array([e.center.to_array() for e in elements]),
            normals=np.array([e.normal.to_array() for e in elements]),
            areas=np.array([e.area_m2 for e in elements], dtype=float),
            reflectances=np.array([e.reflectance for e in elements], dtype=float),
            surfaces=[e.surface for e in elements],
        )

    def to_elements(self) -> List[SurfaceElement]:
        return [
            SurfaceElement(
                surface=self.surfaces[i],
                center=Vec3.from_array(self.centers[i]),
                normal=Vec3.from_array(self.normals[i]),
                area_m2=float(self.areas[i]),
                reflectance=float(self.reflectances[i]),
            )
            for i in range(len(self))
        ]

    def coupling(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        单元间耦合矩阵 K 与距离矩阵 D。

        K[i, j] 为单元 i 作为 n=1 朗伯源发出的功率被单元 j 接收的比例；
        对角线及背向的单元对为 0。结果缓存，同一场景的所有链路共用。
        """
        if self._coupling is None:
            if len(self) > LARGE_COUPLING_WARNING:
                logger.warning(
                    f"二阶反射单元数较多 ({len(self)})，耦合矩阵约需 {len(self) ** 2 * 40 / 1e9:.1f} GB 内存"
                )
            diff = self.centers[np.newaxis, :, :] - self.centers[:, np.newaxis, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            with np.errstate(divide="ignore", invalid="ignore"):
                cos_out = np.einsum("ik,ijk->ij", self.normals, diff) / dist
                cos_in = -np.einsum("jk,ijk->ij", self.normals, diff) / dist
                k = cos_out / math.pi * self.areas[np.newaxis, :] * cos_in / dist ** 2
            valid = (dist > 0) & (cos_out > 0) & (cos_in > 0)
            self._coupling = (np.where(valid, k, 0.0), dist)
        return self._coupling


def _edges(length: float, resolution: float) -> np.ndarray:
    count = max(1, math.ceil(length / resolution - 1e-9))
    return np.array([min(i * resolution, length) for i in range(count + 1)])


def room_mesh(dims: Sequence[float], reflectances: Reflectances, resolution: float) -> SurfaceMesh:
    """按给定边长把六个面离散为单元（边缘允许不完整单元，按面积计）"""
    if len(dims) != 3 or any(not math.isfinite(d) or d <= 0 for d in dims):
        raise ConfigurationError(f"房间尺寸必须为正: {tuple(dims)}")
    if not math.isfinite(resolution) or resolution <= 0:
        raise ConfigurationError(f"离散分辨率必须为正: {resolution}")

    centers, normals, areas, rhos = [], [], [], []
    surfaces: List[SurfaceName] = []
    for name, fixed_axis, fixed_dim, (u_axis, v_axis), normal in _SURFACES:
        u_edges = _edges(dims[u_axis], resolution)
        v_edges = _edges(dims[v_axis], resolution)
        u_mid = (u_edges[:-1] + u_edges[1:]) / 2
        v_mid = (v_edges[:-1] + v_edges[1:]) / 2
        uu, vv = np.meshgrid(u_mid, v_mid, indexing="ij")
        du, dv = np.meshgrid(np.diff(u_edges), np.diff(v_edges), indexing="ij")

        block = np.zeros((uu.size, 3))
        block[:, u_axis] = uu.ravel()
        block[:, v_axis] = vv.ravel()
        block[:, fixed_axis] = 0.0 if fixed_dim is None else dims[fixed_dim]

        centers.append(block)
        normals.append(np.tile(np.array(normal), (uu.size, 1)))
        areas.append((du * dv).ravel())
        rhos.append(np.full(uu.size, reflectances.for_surface(name)))
        surfaces.extend([name] * uu.size)

    mesh = SurfaceMesh(
        centers=np.vstack(centers),
        normals=np.vstack(normals),
        areas=np.concatenate(areas),
        reflectances=np.concatenate(rhos),
        surfaces=surfaces,
    )
    logger.debug(f"房间离散完成: 分辨率 {resolution} m, 单元数 {len(mesh)}")
    return mesh


def build_room(dims: Sequence[float], reflectances: Reflectances, resolution: float) -> List[SurfaceElement]:
    """把房间离散为 SurfaceElement 列表（顺序：天花板、地面、西、东、南、北）"""
    return room_mesh(dims, reflectances, resolution).to_elements()


def paper_default_scenario() -> Scenario:
    """内置场景：8×8×3 m 机房，4 个四支路 ADT，4 个机架顶部接收机"""
    wavelengths = list(OwcWavelength)
    transmitters = [
        Transmitter(
            name=f"ADT{t + 1}",
            position=Vec3(x=pos[0], y=pos[1], z=pos[2]),
            branches=[
                AdtBranch(
                    azimuth_deg=DEFAULT_AZIMUTHS[t][b],
                    elevation_deg=DEFAULT_ELEVATIONS[t][b],
                    semi_angle_deg=5.0,
                    power_w=4e-3,
                    wavelength=wavelengths[b],
                )
                for b in range(4)
            ],
        )
        for t, pos in enumerate(DEFAULT_ADT_POSITIONS)
    ]
    receivers = [
        Receiver(name=f"Rx{r + 1}", position=Vec3(x=pos[0], y=pos[1], z=pos[2]), kind=ReceiverKind.ADR)
        for r, pos in enumerate(DEFAULT_RECEIVER_POSITIONS)
    ]
    return Scenario(
        name="paper",
        room=Room(),
        transmitters=transmitters,
        receivers=receivers,
        controls=SimulationControls(),
    )


BUILTIN_SCENARIOS = {"paper": paper_default_scenario}


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigurationError(f"未知的内置场景: {name}")
    return BUILTIN_SCENARIOS[name]()


def load_scenario(path: Union[str, Path]) -> Scenario:
    """读取 JSON 场景文件"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"无法读取场景文件 {path}: {e}") from e
    try:
        return Scenario.model_validate_json(text)
    except ValidationError as e:
        raise ConfigurationError(f"场景文件 {path} 校验失败: {e}") from e


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    """写出 JSON 场景文件"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(scenario.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"场景已写出: {target}")
    return target


def load_calibration(path: Union[str, Path]) -> ReceiverCalibration:
    """读取接收机标定文件"""
    try:
        return ReceiverCalibration.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"无法读取标定文件 {path}: {e}") from e
    except ValidationError as e:
        raise ConfigurationError(f"标定文件 {path} 校验失败: {e}") from e


def apply_overrides(
    scenario: Scenario,
    receiver_kind: Optional[ReceiverKind] = None,
    max_reflection_order: Optional[int] = None,
    time_bin_s: Optional[float] = None,
    first_order_resolution_m: Optional[float] = None,
    second_order_resolution_m: Optional[float] = None,
    interference: Optional[bool] = None,
    calibration: Optional[ReceiverCalibration] = None,
) -> Scenario:
    """返回应用覆盖参数并重新校验后的场景副本"""
    data = scenario.model_dump(mode="json")
    if receiver_kind is not None:
        for receiver in data["receivers"]:
            if receiver["kind"] != ReceiverKind(receiver_kind).value:
                # 换类型即换器件，视场和支路朝向回到该类型缺省值
                receiver["fov_deg"] = None
                receiver["branch_normals"] = None
            receiver["kind"] = ReceiverKind(receiver_kind).value
    if max_reflection_order is not None:
        data["controls"]["max_reflection_order"] = max_reflection_order
    if time_bin_s is not None:
        data["controls"]["time_bin_s"] = time_bin_s
    if interference is not None:
        data["controls"]["interference"] = interference
    if first_order_resolution_m is not None:
        data["room"]["first_order_resolution_m"] = first_order_resolution_m
    if second_order_resolution_m is not None:
        data["room"]["second_order_resolution_m"] = second_order_resolution_m
    if calibration is not None:
        for receiver in data["receivers"]:
            receiver["calibration"] = calibration.model_dump(mode="json")
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"覆盖参数非法: {e}") from e


def receiver_detectors(receiver: Receiver, transmitters: Sequence[Transmitter]) -> List[Detector]:
    """WFOV 为单个探测器；ADR 每个支路一个探测器，缺省对准各 ADT"""
    area = receiver.calibration.area_m2
    fov = receiver.effective_fov_deg
    if receiver.kind is ReceiverKind.WFOV:
        return [Detector(position=receiver.position, normal=receiver.normal, area_m2=area, fov_deg=fov)]

    if receiver.branch_normals is not None:
        normals = [unit(n.to_array()) for n in receiver.branch_normals]
    else:
        origin = receiver.position.to_array()
        normals = [unit(tx.position.to_array() - origin) for tx in transmitters]
    return [
        Detector(position=receiver.position, normal=Vec3.from_array(n), area_m2=area, fov_deg=fov)
        for n in normals
    ]


def resolve_targets(scenario: Scenario) -> Dict[Tuple[int, int], int]:
    """
    确定每个 ADT 支路服务的接收机。

    显式 target_receiver 优先；其余支路在各 ADT 内按“支路轴线与接收机方向夹角最小”
    贪心匹配，夹角相同时按支路序号、接收机序号取先，保证同一 ADT 的支路服务不同接收机。
    """
    targets: Dict[Tuple[int, int], int] = {}
    for t, tx in enumerate(scenario.transmitters):
        used_receivers = set()
        pending: List[int] = []
        for b, branch in enumerate(tx.branches):
            if branch.target_receiver is not None:
                targets[(t, b)] = branch.target_receiver
                used_receivers.add(branch.target_receiver)
            else:
                pending.append(b)

        origin = tx.position.to_array()
        candidates = []
        for b in pending:
            axis = np.array(tx.branches[b].direction)
            for r, rx in enumerate(scenario.receivers):
                if r in used_receivers:
                    continue
                candidates.append((angle_between_deg(axis, rx.position.to_array() - origin), b, r))
        candidates.sort()

        assigned_branches = set()
        for _, b, r in candidates:
            if b in assigned_branches or r in used_receivers:
                continue
            targets[(t, b)] = r
            assigned_branches.add(b)
            used_receivers.add(r)
    return dict(sorted(targets.items()))


def beam_offset_deg(scenario: Scenario, transmitter: int, branch: int, receiver: int) -> float:
    """支路轴线与 ADT→接收机方向的夹角（度）"""
    tx = scenario.transmitters[transmitter]
    axis = np.array(tx.branches[branch].direction)
    return angle_between_deg(axis, scenario.receivers[receiver].position.to_array() - tx.position.to_array())


def uncovered_targets(
    scenario: Scenario, targets: Optional[Dict[Tuple[int, int], int]] = None
) -> List[Tuple[int, int]]:
    """目标接收机落在波束之外的 (ADT, 支路)，这些链路只能靠反射与旁瓣"""
    targets = resolve_targets(scenario) if targets is None else targets
    uncovered = []
    for (t, b), r in targets.items():
        cone = BEAM_COVERAGE_FACTOR * scenario.transmitters[t].branches[b].semi_angle_deg
        if beam_offset_deg(scenario, t, b, r) > cone:
            uncovered.append((t, b))
    return sorted(uncovered)
