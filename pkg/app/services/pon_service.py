"""PON 服务模块 - AWGR 循环路由与全互连波长分配"""
from typing import Dict, List, Optional, Sequence, Set, Tuple

from loguru import logger

from app.errors import DomainError, InfeasibleTopologyError
from app.models import (
    AssignmentEntry,
    Awgr,
    PonTopology,
    PortAttachment,
    Violation,
    ViolationKind,
    WavelengthAssignment,
)

Option = Tuple[str, int]  # (AWGR 名称, 波长序号)
OccupancyKey = Tuple[str, str, str, int]  # (方向, 节点, AWGR, 波长)

DEFAULT_NODES = ["AP1", "AP2", "AP3", "AP4", "OLT"]
# 两个 5×5 AWGR，所有节点双归属；(输入端口, 输出端口)
DEFAULT_PORT_MAP = {
    "AWGR-A": {"AP1": (0, 4), "AP2": (1, 0), "AP3": (4, 3), "AP4": (3, 1), "OLT": (2, 2)},
    "AWGR-B": {"AP1": (0, 1), "AP2": (1, 3), "AP3": (3, 0), "AP4": (2, 4), "OLT": (4, 2)},
}


def awgr_route(input_port: int, wavelength: int, size: int, wavelengths: Optional[int] = None) -> int:
    """循环路由：输出端口 = (输入端口 + 波长序号) mod N"""
    limit = size if wavelengths is None else wavelengths
    if size < 1:
        raise DomainError(f"AWGR 端口数必须为正: {size}")
    if not 0 <= input_port < size:
        raise DomainError(f"输入端口越界: {input_port} (N={size})")
    if not 0 <= wavelength < limit:
        raise DomainError(f"波长序号越界: {wavelength} (W={limit})")
    return (input_port + wavelength) % size


def default_node_names(count: int) -> List[str]:
    """AP1..AP{n-1} 加 OLT"""
    if count < 2:
        raise InfeasibleTopologyError(f"节点数至少为 2: {count}")
    return [f"AP{i + 1}" for i in range(count - 1)] + ["OLT"]


def build_topology(node_count: int, wavelengths: int = 4, awgr_count: int = 2) -> PonTopology:
    """
    生成 N=节点数 的通用拓扑：节点 x 在每个 AWGR 上占用输入端口 x，
    在第 g 个 AWGR 上占用输出端口 (x − 1 − g·W) mod N，
    使第 g 个 AWGR 上的波长 w 连接 x → x + 1 + g·W + w。
    """
    if wavelengths < 1 or awgr_count < 1:
        raise InfeasibleTopologyError(f"波长数与 AWGR 数必须为正: W={wavelengths}, AWGR={awgr_count}")
    nodes = default_node_names(node_count)
    size = node_count
    awgrs = [Awgr(name=f"AWGR-{chr(ord('A') + g)}", size=size) for g in range(awgr_count)]
    attachments = {
        node: [
            PortAttachment(awgr=awgr.name, input_port=x, output_port=(x - 1 - g * wavelengths) % size)
            for g, awgr in enumerate(awgrs)
        ]
        for x, node in enumerate(nodes)
    }
    return PonTopology(nodes=nodes, awgrs=awgrs, attachments=attachments, wavelengths=wavelengths)


def paper_default_topology() -> PonTopology:
    """4 个 AP 与 OLT 经两个 AWGR 互连的内置拓扑，参考波长矩阵在此端口映射下有效"""
    awgrs = [Awgr(name=name, size=len(DEFAULT_NODES)) for name in DEFAULT_PORT_MAP]
    attachments = {
        node: [
            PortAttachment(awgr=name, input_port=ports[node][0], output_port=ports[node][1])
            for name, ports in DEFAULT_PORT_MAP.items()
        ]
        for node in DEFAULT_NODES
    }
    return PonTopology(nodes=list(DEFAULT_NODES), awgrs=awgrs, attachments=attachments, wavelengths=4)


def pair_options(topology: PonTopology, sender: str, receiver: str) -> List[Option]:
    """满足循环路由的 (AWGR, 波长) 候选，按 AWGR 顺序、波长升序"""
    options: List[Option] = []
    for awgr in topology.awgrs:
        src = topology.attachment(sender, awgr.name)
        dst = topology.attachment(receiver, awgr.name)
        if src is None or dst is None:
            continue
        for w in range(topology.wavelengths):
            if awgr_route(src.input_port, w, awgr.size, topology.wavelengths) == dst.output_port:
                options.append((awgr.name, w))
    return options


def _occupancy(sender: str, receiver: str, awgr: str, wavelength: int) -> Tuple[OccupancyKey, OccupancyKey]:
    """一条连接占用发送方上行光纤与接收方下行光纤上的同一波长"""
    return ("ingress", sender, awgr, wavelength), ("egress", receiver, awgr, wavelength)


def _ordered_pairs(nodes: Sequence[str]) -> List[Tuple[str, str]]:
    return [(s, r) for s in nodes for r in nodes if s != r]


def assign_wavelengths(topology: PonTopology) -> WavelengthAssignment:
    """回溯搜索最大化已实现的有向连接数（精确解），搜索顺序固定"""
    orphans = [node for node in topology.nodes if not topology.attachments.get(node)]
    if orphans:
        raise InfeasibleTopologyError(f"节点未连接任何 AWGR 端口: {', '.join(orphans)}")

    pairs = _ordered_pairs(topology.nodes)
    options = [pair_options(topology, s, r) for s, r in pairs]
    # suffix[i] = 第 i 对及之后仍有候选的连接数，用作上界
    suffix = [0] * (len(pairs) + 1)
    for i in range(len(pairs) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + (1 if options[i] else 0)
    reachable = suffix[0]

    occupied: Set[OccupancyKey] = set()
    chosen: List[Optional[Option]] = [None] * len(pairs)
    best: Dict[str, object] = {"count": -1, "choice": list(chosen)}

    def search(index: int, count: int) -> bool:
        if count + suffix[index] <= best["count"]:
            return False
        if index == len(pairs):
            best["count"] = count
            best["choice"] = list(chosen)
            return count == reachable
        sender, receiver = pairs[index]
        for awgr, w in options[index]:
            keys = _occupancy(sender, receiver, awgr, w)
            if any(key in occupied for key in keys):
                continue
            occupied.update(keys)
            chosen[index] = (awgr, w)
            done = search(index + 1, count + 1)
            occupied.difference_update(keys)
            chosen[index] = None
            if done:
                return True
        return search(index + 1, count)

    search(0, 0)

    entries: List[AssignmentEntry] = []
    for (sender, receiver), option in zip(pairs, best["choice"]):
        if option is None:
            continue
        awgr, w = option
        entries.append(
            AssignmentEntry(
                sender=sender,
                receiver=receiver,
                wavelength=w,
                awgr=awgr,
                input_port=topology.attachment(sender, awgr).input_port,
                output_port=topology.attachment(receiver, awgr).output_port,
            )
        )
    logger.info(f"波长分配完成: 实现 {len(entries)}/{len(pairs)} 条有向连接")
    return WavelengthAssignment(entries=entries, optimum=len(entries))


def validate_assignment(assignment: WavelengthAssignment, topology: PonTopology) -> List[Violation]:
    """校验完整性、路由一致性与 (光纤, 方向, 波长) 冲突；违例作为数据返回"""
    violations: List[Violation] = []
    seen: Set[Tuple[str, str]] = set()
    occupied: Dict[OccupancyKey, Tuple[str, str]] = {}
    sizes = {awgr.name: awgr.size for awgr in topology.awgrs}

    def report(kind: ViolationKind, entry: AssignmentEntry, detail: str) -> None:
        violations.append(Violation(kind=kind, sender=entry.sender, receiver=entry.receiver, detail=detail))

    for entry in assignment.entries:
        pair = (entry.sender, entry.receiver)
        if entry.sender not in topology.nodes or entry.receiver not in topology.nodes:
            report(ViolationKind.INVALID, entry, "未知节点")
            continue
        if entry.sender == entry.receiver:
            report(ViolationKind.INVALID, entry, "不允许自连接")
            continue
        if pair in seen:
            report(ViolationKind.INVALID, entry, "同一有向连接重复分配")
            continue
        seen.add(pair)
        if entry.wavelength >= topology.wavelengths:
            report(ViolationKind.INVALID, entry, f"波长序号 {entry.wavelength} 超出 W={topology.wavelengths}")
            continue
        if entry.awgr not in sizes:
            report(ViolationKind.INVALID, entry, f"未知 AWGR: {entry.awgr}")
            continue
        src = topology.attachment(entry.sender, entry.awgr)
        dst = topology.attachment(entry.receiver, entry.awgr)
        if src is None or dst is None:
            report(ViolationKind.INVALID, entry, f"节点未连接到 {entry.awgr}")
            continue
        if (entry.input_port is not None and entry.input_port != src.input_port) or (
            entry.output_port is not None and entry.output_port != dst.output_port
        ):
            report(ViolationKind.INVALID, entry, "声明的端口与拓扑端口映射不一致")

        routed = awgr_route(src.input_port, entry.wavelength, sizes[entry.awgr], topology.wavelengths)
        if routed != dst.output_port:
            report(
                ViolationKind.ROUTING,
                entry,
                f"{entry.awgr} 上 λ{entry.wavelength + 1} 自输入端口 {src.input_port} 路由到输出端口 {routed}，"
                f"而非 {entry.receiver} 的端口 {dst.output_port}",
            )

        for key in _occupancy(entry.sender, entry.receiver, entry.awgr, entry.wavelength):
            if key in occupied:
                other = occupied[key]
                report(
                    ViolationKind.COLLISION,
                    entry,
                    f"{key[1]} 在 {key[2]} 的{'上行' if key[0] == 'ingress' else '下行'}光纤上 "
                    f"λ{key[3] + 1} 已被 {other[0]}→{other[1]} 占用",
                )
            else:
                occupied[key] = pair

    for sender, receiver in _ordered_pairs(topology.nodes):
        if (sender, receiver) not in seen:
            violations.append(
                Violation(kind=ViolationKind.MISSING, sender=sender, receiver=receiver, detail="未分配波长")
            )
    return violations


def infer_assignment(matrix: Dict[str, Dict[str, int]], topology: PonTopology) -> WavelengthAssignment:
    """
    由波长矩阵（编号从 1 起，不含 AWGR 列）推断分配：
    每项取第一个能路由该连接的公共 AWGR，找不到时取第一个公共 AWGR 交给校验报告。
    """
    entries: List[AssignmentEntry] = []
    for sender, row in matrix.items():
        for receiver, label in row.items():
            if label < 1:
                raise DomainError(f"波长编号必须从 1 起: {sender}->{receiver} = {label}")
            w = label - 1
            common = [
                awgr
                for awgr in topology.awgrs
                if topology.attachment(sender, awgr.name) is not None
                and topology.attachment(receiver, awgr.name) is not None
            ]
            chosen = None
            for awgr in common:
                src = topology.attachment(sender, awgr.name)
                dst = topology.attachment(receiver, awgr.name)
                if 0 <= w < topology.wavelengths and (src.input_port + w) % awgr.size == dst.output_port:
                    chosen = awgr
                    break
            if chosen is None:
                chosen = common[0] if common else topology.awgrs[0]
            src = topology.attachment(sender, chosen.name)
            dst = topology.attachment(receiver, chosen.name)
            entries.append(
                AssignmentEntry(
                    sender=sender,
                    receiver=receiver,
                    wavelength=w,
                    awgr=chosen.name,
                    input_port=src.input_port if src else None,
                    output_port=dst.output_port if dst else None,
                )
            )
    return WavelengthAssignment(entries=entries, optimum=len(entries))


def assignment_matrix(assignment: WavelengthAssignment, nodes: Sequence[str]) -> Dict[str, Dict[str, int]]:
    """把分配结果转为 发送方 -> 接收方 -> 波长编号（1 起）"""
    lookup = assignment.lookup()
    return {
        s: {r: lookup[(s, r)].wavelength + 1 for r in nodes if r != s and (s, r) in lookup}
        for s in nodes
    }
