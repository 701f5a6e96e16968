"""数据模型定义"""
import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.geometry import branch_direction


# ---------------------------------------------------------------- 场景

class Vec3(BaseModel):
    """三维坐标 / 向量（米，右手系，z 轴向上，地面 z=0）"""
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @field_validator("x", "y", "z")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"坐标分量必须为有限值: {value}")
        return value

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, values) -> "Vec3":
        return cls(x=float(values[0]), y=float(values[1]), z=float(values[2]))


class SurfaceName(str, Enum):
    """房间六个面"""
    CEILING = "ceiling"
    FLOOR = "floor"
    WEST = "west"      # x = 0
    EAST = "east"      # x = L
    SOUTH = "south"    # y = 0
    NORTH = "north"    # y = W


class SurfaceElement(BaseModel):
    """反射面离散单元"""
    surface: SurfaceName
    center: Vec3
    normal: Vec3 = Field(..., description="指向房间内部的单位法向量")
    area_m2: float = Field(..., gt=0, description="单元面积 dA")
    reflectance: float = Field(..., ge=0, le=1, description="反射系数 ρ")


class Reflectances(BaseModel):
    """各面反射系数"""
    ceiling: float = Field(default=0.8, ge=0, le=1)
    floor: float = Field(default=0.3, ge=0, le=1)
    west: float = Field(default=0.8, ge=0, le=1)
    east: float = Field(default=0.8, ge=0, le=1)
    south: float = Field(default=0.8, ge=0, le=1)
    north: float = Field(default=0.8, ge=0, le=1)

    def for_surface(self, surface: SurfaceName) -> float:
        return getattr(self, surface.value)


class Room(BaseModel):
    """长方体机房"""
    length_m: float = Field(default=8.0, gt=0, description="x 方向长度")
    width_m: float = Field(default=8.0, gt=0, description="y 方向宽度")
    height_m: float = Field(default=3.0, gt=0, description="z 方向高度")
    reflectances: Reflectances = Field(default_factory=Reflectances)
    first_order_resolution_m: float = Field(default=0.1, gt=0, description="一阶反射单元边长")
    second_order_resolution_m: float = Field(default=0.5, gt=0, description="二阶反射单元边长")

    @property
    def dims(self) -> Tuple[float, float, float]:
        return (self.length_m, self.width_m, self.height_m)


class OwcWavelength(str, Enum):
    """下行红外波长"""
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"

    @property
    def nm(self) -> int:
        return {"L1": 850, "L2": 880, "L3": 900, "L4": 950}[self.value]

    @property
    def index(self) -> int:
        return int(self.value[1:]) - 1


class AdtBranch(BaseModel):
    """ADT 的一个定向朗伯发射支路"""
    azimuth_deg: float = Field(..., description="方位角，自 +x 逆时针")
    elevation_deg: float = Field(..., description="俯角，自水平面向下")
    semi_angle_deg: float = Field(default=5.0, gt=0, le=60, description="半功率半角")
    power_w: float = Field(default=4e-3, ge=0, description="发射光功率")
    wavelength: OwcWavelength
    target_receiver: Optional[int] = Field(default=None, ge=0, description="服务的接收机序号（0 起）")

    @property
    def lambertian_order(self) -> float:
        return -math.log(2.0) / math.log(math.cos(math.radians(self.semi_angle_deg)))

    @property
    def direction(self) -> Tuple[float, float, float]:
        return branch_direction(self.azimuth_deg, self.elevation_deg)


class Transmitter(BaseModel):
    """角度分集发射机 (ADT)"""
    name: str
    position: Vec3
    branches: List[AdtBranch] = Field(..., min_length=1)

    @field_validator("branches")
    @classmethod
    def _distinct_wavelengths(cls, branches: List[AdtBranch]) -> List[AdtBranch]:
        seen = [b.wavelength for b in branches]
        if len(set(seen)) != len(seen):
            raise ValueError("同一 ADT 内各支路波长必须互不相同")
        return branches


class ReceiverKind(str, Enum):
    """接收机类型"""
    WFOV = "wfov"
    ADR = "adr"

    @property
    def default_fov_deg(self) -> float:
        return 90.0 if self is ReceiverKind.WFOV else 5.0


class ReceiverCalibration(BaseModel):
    """接收机标定参数（均非公开数据，冻结在 data/calibration.json）"""
    schema_version: Literal["calibration.v1"] = "calibration.v1"
    area_m2: float = Field(default=2e-5, gt=0, description="探测器面积（每个 ADR 支路相同）")
    responsivity_a_w: float = Field(default=0.4, gt=0, description="响应度 R")
    bandwidth_hz: float = Field(default=5e9, gt=0, description="接收带宽 B")
    preamp_noise_density: float = Field(default=5e-12, ge=0, description="前放噪声电流谱密度 A/√Hz")
    ambient_irradiance_w_m2: float = Field(default=1.0, ge=0, description="环境背景辐照度")
    note: Optional[str] = None


class Receiver(BaseModel):
    """机架顶部接收机（WFOV 或 ADR）"""
    name: str
    position: Vec3
    kind: ReceiverKind = ReceiverKind.ADR
    fov_deg: Optional[float] = Field(default=None, gt=0, le=90, description="每支路视场半角，缺省按类型取值")
    normal: Vec3 = Field(default=Vec3(x=0.0, y=0.0, z=1.0))
    branch_normals: Optional[List[Vec3]] = Field(
        default=None, description="ADR 支路朝向；缺省为每个 ADT 一支路并对准该 ADT"
    )
    calibration: ReceiverCalibration = Field(default_factory=ReceiverCalibration)

    @property
    def effective_fov_deg(self) -> float:
        return self.fov_deg if self.fov_deg is not None else self.kind.default_fov_deg

    @property
    def background_power_w(self) -> float:
        fov = math.radians(self.effective_fov_deg)
        return self.calibration.ambient_irradiance_w_m2 * self.calibration.area_m2 * math.sin(fov) ** 2

    @property
    def background_photocurrent_a(self) -> float:
        return self.calibration.responsivity_a_w * self.background_power_w


class SimulationControls(BaseModel):
    """仿真控制参数"""
    max_reflection_order: int = Field(default=2, ge=0, le=2)
    time_bin_s: float = Field(default=1e-10, gt=0)
    interference: bool = Field(default=False, description="同波长串扰是否计入背景散粒噪声")


class Scenario(BaseModel):
    """完整仿真场景"""
    schema_version: Literal["scenario.v1"] = "scenario.v1"
    name: str = "custom"
    room: Room = Field(default_factory=Room)
    transmitters: List[Transmitter]
    receivers: List[Receiver] = Field(..., min_length=1)
    controls: SimulationControls = Field(default_factory=SimulationControls)

    @model_validator(mode="after")
    def _check_targets(self) -> "Scenario":
        for tx in self.transmitters:
            for branch in tx.branches:
                if branch.target_receiver is not None and branch.target_receiver >= len(self.receivers):
                    raise ValueError(f"{tx.name} 的目标接收机序号越界: {branch.target_receiver}")
        return self


# ---------------------------------------------------------------- 信道

class Emitter(BaseModel):
    """朗伯点源（ADT 支路或反射单元）"""
    position: Vec3
    direction: Vec3
    lambertian_order: float = Field(..., ge=1 - 1e-9)
    power_w: float = Field(default=1.0, ge=0)

    @classmethod
    def from_branch(cls, position: Vec3, branch: AdtBranch) -> "Emitter":
        return cls(
            position=position,
            direction=Vec3.from_array(branch.direction),
            lambertian_order=branch.lambertian_order,
            power_w=branch.power_w,
        )


class Detector(BaseModel):
    """光电探测器（WFOV 整体或 ADR 单支路）"""
    position: Vec3
    normal: Vec3
    area_m2: float = Field(..., gt=0)
    fov_deg: float = Field(..., gt=0, le=90)


class ImpulseResponse(BaseModel):
    """分箱冲激响应"""
    bin_width_s: float = Field(..., gt=0)
    origin_s: float = 0.0
    bins: List[float]

    @field_validator("bins")
    @classmethod
    def _non_negative(cls, bins: List[float]) -> List[float]:
        if any(value < 0 for value in bins):
            raise ValueError("冲激响应各箱功率必须非负")
        return bins

    @property
    def total_power_w(self) -> float:
        return math.fsum(self.bins)

    @property
    def times_s(self) -> List[float]:
        return [self.origin_s + i * self.bin_width_s for i in range(len(self.bins))]


class PathContribution(BaseModel):
    """单条传播路径"""
    order: int = Field(..., ge=0, le=2)
    delay_s: float = Field(..., ge=0)
    power_w: float = Field(..., ge=0)


class PathSummary(BaseModel):
    """(发射机, 支路, 接收机, 接收支路) 的接收功率汇总"""
    transmitter: int
    branch: int
    receiver: int
    receiver_branch: int
    wavelength: OwcWavelength
    power_w: float = Field(..., ge=0)
    los_power_w: float = Field(..., ge=0)
    delay_spread_s: Optional[float] = None
    is_target: bool = False


# ---------------------------------------------------------------- 链路预算

class NoiseBreakdown(BaseModel):
    """噪声方差分解 (A²)"""
    preamp_a2: float = Field(..., ge=0)
    background_a2: float = Field(..., ge=0)
    signal_a2: float = Field(..., ge=0)
    total_a2: float = Field(..., ge=0)


class LinkBudget(BaseModel):
    """单条下行链路预算"""
    transmitter: int
    branch: int
    receiver: int
    receiver_branch: int
    wavelength: OwcWavelength
    received_power_w: float = Field(..., ge=0)
    interference_power_w: float = Field(default=0.0, ge=0)
    ps1_w: float = Field(..., ge=0)
    ps0_w: float = Field(..., ge=0)
    responsivity_a_w: float = Field(..., gt=0)
    noise: NoiseBreakdown
    snr: float = Field(..., ge=0)
    ber: float = Field(..., ge=0, le=0.5)
    capacity_bps: float = Field(..., ge=0)
    delay_spread_s: Optional[float] = None

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr) if self.snr > 0 else float("-inf")


# ---------------------------------------------------------------- PON

class Awgr(BaseModel):
    """N×N 阵列波导光栅路由器"""
    name: str
    size: int = Field(..., ge=2, description="端口数 N")


class PortAttachment(BaseModel):
    """节点在某个 AWGR 上占用的输入/输出端口"""
    awgr: str
    input_port: int = Field(..., ge=0)
    output_port: int = Field(..., ge=0)


class PonTopology(BaseModel):
    """AP 与 OLT 通过 AWGR 互连的 PON 拓扑"""
    schema_version: Literal["topology.v1"] = "topology.v1"
    nodes: List[str] = Field(..., min_length=2)
    awgrs: List[Awgr] = Field(..., min_length=1)
    attachments: Dict[str, List[PortAttachment]] = Field(default_factory=dict)
    wavelengths: int = Field(default=4, ge=1, description="PON 波长数 W")

    @model_validator(mode="after")
    def _check_ports(self) -> "PonTopology":
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("节点名称重复")
        sizes = {a.name: a.size for a in self.awgrs}
        if len(sizes) != len(self.awgrs):
            raise ValueError("AWGR 名称重复")
        used_in: Dict[Tuple[str, int], str] = {}
        used_out: Dict[Tuple[str, int], str] = {}
        for node, ports in self.attachments.items():
            if node not in self.nodes:
                raise ValueError(f"未知节点: {node}")
            awgrs = [p.awgr for p in ports]
            if len(set(awgrs)) != len(awgrs):
                raise ValueError(f"节点 {node} 在同一 AWGR 上只能占用一组端口")
            for port in ports:
                if port.awgr not in sizes:
                    raise ValueError(f"未知 AWGR: {port.awgr}")
                size = sizes[port.awgr]
                if port.input_port >= size or port.output_port >= size:
                    raise ValueError(f"{node} 在 {port.awgr} 上的端口越界 (N={size})")
                for table, key in ((used_in, (port.awgr, port.input_port)), (used_out, (port.awgr, port.output_port))):
                    if key in table:
                        raise ValueError(f"{port.awgr} 端口 {key[1]} 被 {table[key]} 与 {node} 重复占用")
                    table[key] = node
        return self

    def awgr_size(self, name: str) -> int:
        for awgr in self.awgrs:
            if awgr.name == name:
                return awgr.size
        raise KeyError(name)

    def attachment(self, node: str, awgr: str) -> Optional[PortAttachment]:
        for port in self.attachments.get(node, []):
            if port.awgr == awgr:
                return port
        return None


class AssignmentEntry(BaseModel):
    """一条有向连接的波长分配"""
    sender: str
    receiver: str
    wavelength: int = Field(..., ge=0, description="波长序号（0 起）")
    awgr: str
    input_port: Optional[int] = None
    output_port: Optional[int] = None


class WavelengthAssignment(BaseModel):
    """全互连波长分配结果"""
    schema_version: Literal["assignment.v1"] = "assignment.v1"
    entries: List[AssignmentEntry] = Field(default_factory=list)
    optimum: int = Field(default=0, ge=0, description="已实现的有向连接数")

    def lookup(self) -> Dict[Tuple[str, str], AssignmentEntry]:
        return {(e.sender, e.receiver): e for e in self.entries}


class ViolationKind(str, Enum):
    """校验违例类型"""
    MISSING = "missing"
    ROUTING = "routing"
    COLLISION = "collision"
    INVALID = "invalid"


class Violation(BaseModel):
    """波长分配校验违例"""
    kind: ViolationKind
    sender: str
    receiver: str
    detail: str


# ---------------------------------------------------------------- 功耗

class SpineLeafPowerParams(BaseModel):
    """传统 spine-leaf 架构功耗参数"""
    spine_w: float = Field(default=660.0, ge=0, description="Ps 每台 spine 交换机功耗")
    spines: int = Field(default=4, ge=0, description="Ns")
    leaf_w: float = Field(default=508.0, ge=0, description="Pl 每台 leaf 交换机功耗")
    leaves: int = Field(default=4, ge=0, description="Nl")
    server_transceiver_w: float = Field(default=3.0, ge=0, description="Pcs 服务器收发器功耗")
    server_transceivers: int = Field(default=128, ge=0, description="Ncs")


class PonOwcPowerParams(BaseModel):
    """PON/OWC 架构功耗参数"""
    owc_transceiver_w: float = Field(default=0.4, ge=0, description="Po 每个 OWC 收发器功耗")
    owc_transceivers: int = Field(default=8, ge=0, description="No")
    olt_w: float = Field(default=480.0, ge=0, description="K OLT 功耗")
    leaf_w: float = Field(default=508.0, ge=0, description="Pl")
    leaves: int = Field(default=4, ge=0, description="Nl")
    server_transceiver_w: float = Field(default=3.0, ge=0, description="Pc")
    server_transceivers: int = Field(default=128, ge=0, description="Nc")


class PowerReport(BaseModel):
    """功耗对比报告"""
    schema_version: Literal["power.v1"] = "power.v1"
    baseline_w: float
    proposed_w: float
    savings: float
    baseline_terms: Dict[str, float]
    proposed_terms: Dict[str, float]


# ---------------------------------------------------------------- CLI / API

class OutputFormat(str, Enum):
    """结果文件格式"""
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    """一次 CLI 运行的完整配置"""
    subcommand: Literal["simulate", "assign", "power", "scenario"]
    scenario_path: Optional[str] = None
    builtin: Optional[str] = None
    output_dir: str = "results"
    output_format: OutputFormat = OutputFormat.CSV
    overrides: Dict[str, object] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _one_source(self) -> "RunConfig":
        if self.subcommand == "simulate" and (self.scenario_path is None) == (self.builtin is None):
            raise ValueError("必须且只能指定一个场景来源 (--scenario 或 --builtin)")
        return self


class SimulateRequest(BaseModel):
    """下行仿真请求"""
    scenario: Optional[Scenario] = Field(default=None, description="缺省使用内置场景")
    receiver_kind: Optional[ReceiverKind] = None
    max_reflection_order: Optional[int] = Field(default=None, ge=0, le=2)
    interference: Optional[bool] = None
    first_order_resolution_m: Optional[float] = Field(default=None, gt=0)
    second_order_resolution_m: Optional[float] = Field(default=None, gt=0)


class SimulateResponse(BaseModel):
    """下行仿真响应"""
    schema_version: Literal["link_budget.v1"] = "link_budget.v1"
    scenario: str
    receiver_kind: ReceiverKind
    links: List[LinkBudget]
    peak_capacity_bps: float


class AssignRequest(BaseModel):
    """波长分配请求"""
    topology: Optional[PonTopology] = Field(default=None, description="缺省使用内置拓扑")


class AssignResponse(BaseModel):
    """波长分配响应"""
    assignment: WavelengthAssignment
    violations: List[Violation]


class ValidateRequest(BaseModel):
    """波长分配校验请求"""
    topology: Optional[PonTopology] = None
    assignment: Optional[WavelengthAssignment] = None
    matrix: Optional[Dict[str, Dict[str, int]]] = Field(
        default=None, description="波长矩阵：发送方 -> 接收方 -> 波长编号（1 起）"
    )

    @model_validator(mode="after")
    def _one_input(self) -> "ValidateRequest":
        if (self.assignment is None) == (self.matrix is None):
            raise ValueError("assignment 与 matrix 必须且只能提供一个")
        return self


class ValidateResponse(BaseModel):
    """波长分配校验响应"""
    valid: bool
    violations: List[Violation]


class PowerRequest(BaseModel):
    """功耗对比请求"""
    spine_leaf: SpineLeafPowerParams = Field(default_factory=SpineLeafPowerParams)
    pon_owc: PonOwcPowerParams = Field(default_factory=PonOwcPowerParams)
