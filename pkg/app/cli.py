"""命令行入口 - simulate / assign / power / scenario"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from app.config import Settings
from app.errors import ConfigurationError, OwcSimError
from app.models import (
    LinkBudget,
    OutputFormat,
    PathSummary,
    PonTopology,
    ReceiverKind,
    RunConfig,
)
from app.services.channel_service import ChannelService, MatrixKey
from app.services.link_budget_service import LinkBudgetService
from app.services.pon_service import (
    assign_wavelengths,
    assignment_matrix,
    build_topology,
    infer_assignment,
    paper_default_topology,
    validate_assignment,
)
from app.services.power_service import compare_power, params_for_racks
from app.services.scene_service import (
    apply_overrides,
    builtin_scenario,
    load_calibration,
    load_scenario,
    save_scenario,
)
from app.utils.logger import setup_logging
from app.utils.result_io import read_matrix_csv, write_matrix_csv, write_table

LINK_COLUMNS = [
    "tx", "branch", "rx", "rx_branch", "wavelength", "Pr_W", "interference_W",
    "snr_dB", "ber", "capacity_bps", "delay_spread_s",
]
MATRIX_COLUMNS = [
    "tx", "branch", "rx", "rx_branch", "wavelength", "power_W", "los_power_W", "delay_spread_s", "is_target",
]
IMPULSE_COLUMNS = ["tx", "branch", "rx", "rx_branch", "time_s", "power_W"]
VIOLATION_COLUMNS = ["kind", "sender", "receiver", "detail"]
POWER_COLUMNS = ["metric", "value"]


def _pick(value: Any, settings: Settings, field: str) -> Any:
    """命令行参数优先，其次是显式设置的环境变量，否则返回 None 保留场景自身取值"""
    if value is not None:
        return value
    if field in settings.model_fields_set:
        return getattr(settings, field)
    return None


def link_rows(budgets: Sequence[LinkBudget]) -> List[Dict[str, Any]]:
    return [
        {
            "tx": item.transmitter + 1,
            "branch": item.branch + 1,
            "rx": item.receiver + 1,
            "rx_branch": item.receiver_branch + 1,
            "wavelength": item.wavelength,
            "Pr_W": item.received_power_w,
            "interference_W": item.interference_power_w,
            "snr_dB": item.snr_db if item.snr > 0 else None,
            "ber": item.ber,
            "capacity_bps": item.capacity_bps,
            "delay_spread_s": item.delay_spread_s,
        }
        for item in budgets
    ]


def matrix_rows(matrix: Dict[MatrixKey, PathSummary]) -> List[Dict[str, Any]]:
    return [
        {
            "tx": s.transmitter + 1,
            "branch": s.branch + 1,
            "rx": s.receiver + 1,
            "rx_branch": s.receiver_branch + 1,
            "wavelength": s.wavelength,
            "power_W": s.power_w,
            "los_power_W": s.los_power_w,
            "delay_spread_s": s.delay_spread_s,
            "is_target": s.is_target,
        }
        for s in matrix.values()
    ]


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """评估 16 条下行链路并写出链路预算表与功率矩阵"""
    config = RunConfig(
        subcommand="simulate",
        scenario_path=args.scenario,
        builtin=args.builtin,
        output_dir=args.output_dir or settings.output_dir,
        output_format=args.format or settings.output_format,
    )
    scenario = builtin_scenario(config.builtin) if config.builtin else load_scenario(config.scenario_path)
    if args.seed is not None:
        logger.debug(f"--seed={args.seed} 已忽略（仿真流程是确定性的）")

    calibration_path = args.calibration or settings.calibration_file
    calibration = load_calibration(calibration_path) if calibration_path else None

    receiver = args.receiver or settings.receiver_kind
    if receiver not in ("adr", "wfov", "both"):
        raise ConfigurationError(f"不支持的接收机类型: {receiver}")
    kinds = [ReceiverKind.ADR, ReceiverKind.WFOV] if receiver == "both" else [ReceiverKind(receiver)]

    workers = args.workers or settings.trace_workers
    fmt = config.output_format.value
    out_dir = Path(config.output_dir)
    for kind in kinds:
        configured = apply_overrides(
            scenario,
            receiver_kind=kind,
            max_reflection_order=_pick(args.max_order, settings, "max_reflection_order"),
            time_bin_s=_pick(args.bin_width, settings, "time_bin_s"),
            first_order_resolution_m=_pick(args.first_resolution, settings, "first_order_resolution"),
            second_order_resolution_m=_pick(args.second_resolution, settings, "second_order_resolution"),
            interference=_pick(args.interference, settings, "interference"),
            calibration=calibration,
        )
        channel = ChannelService(configured, max_workers=workers)
        matrix = channel.receiver_power_matrix()
        budgets = LinkBudgetService(max_workers=workers).evaluate_downlink(configured, matrix=matrix, channel=channel)

        write_table(link_rows(budgets), LINK_COLUMNS, out_dir / f"link_budget_{kind.value}.{fmt}", fmt, "link_budget.v1")
        write_table(matrix_rows(matrix), MATRIX_COLUMNS, out_dir / f"power_matrix_{kind.value}.{fmt}", fmt, "power_matrix.v1")
        if args.impulse_responses:
            rows = []
            for item in budgets:
                key = (item.transmitter, item.branch, item.receiver, item.receiver_branch)
                h = channel.impulse_response(key)
                for time_s, power in zip(h.times_s, h.bins):
                    rows.append({
                        "tx": key[0] + 1, "branch": key[1] + 1, "rx": key[2] + 1, "rx_branch": key[3] + 1,
                        "time_s": time_s, "power_W": power,
                    })
            write_table(rows, IMPULSE_COLUMNS, out_dir / f"impulse_responses_{kind.value}.{fmt}", fmt, "impulse_response.v1")

        peak = max(item.capacity_bps for item in budgets)
        logger.info(f"{kind.value} 结果已写入 {out_dir}")
        print(f"{kind.value}: links={len(budgets)} peak_capacity_bps={peak!r}")
    return 0


def _resolve_topology(args: argparse.Namespace, settings: Settings) -> PonTopology:
    if args.topology:
        try:
            return PonTopology.model_validate_json(Path(args.topology).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"无法读取拓扑文件 {args.topology}: {e}") from e
    if args.nodes is not None or args.wavelengths is not None or args.awgrs is not None:
        return build_topology(
            args.nodes if args.nodes is not None else 5,
            wavelengths=args.wavelengths if args.wavelengths is not None else settings.pon_wavelengths,
            awgr_count=args.awgrs if args.awgrs is not None else settings.pon_awgrs,
        )
    return paper_default_topology()


def cmd_assign(args: argparse.Namespace, settings: Settings) -> int:
    """求解（或校验给定的）全互连波长分配"""
    fmt = OutputFormat(args.format or settings.output_format).value
    out_dir = Path(args.output_dir or settings.output_dir)
    topology = _resolve_topology(args, settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "topology.json").write_text(topology.model_dump_json(indent=2) + "\n", encoding="utf-8")

    if args.validate:
        _, matrix = read_matrix_csv(args.validate)
        assignment = infer_assignment(matrix, topology)
    else:
        assignment = assign_wavelengths(topology)
        if fmt == "csv":
            write_matrix_csv(assignment_matrix(assignment, topology.nodes), topology.nodes, out_dir / "assignment_matrix.csv")
        else:
            (out_dir / "assignment.json").write_text(assignment.model_dump_json(indent=2) + "\n", encoding="utf-8")

    violations = validate_assignment(assignment, topology)
    rows = [v.model_dump(mode="json") for v in violations]
    write_table(rows, VIOLATION_COLUMNS, out_dir / f"validation.{fmt}", fmt, "validation.v1")
    if violations:
        for violation in violations:
            logger.error(f"{violation.kind.value}: {violation.sender}->{violation.receiver} {violation.detail}")
        print(f"assignment: pairs={len(assignment.entries)} violations={len(violations)}")
        return 3
    print(f"assignment: pairs={len(assignment.entries)} violations=0")
    return 0


def cmd_power(args: argparse.Namespace, settings: Settings) -> int:
    """写出两种架构的功耗对比报告"""
    fmt = OutputFormat(args.format or settings.output_format).value
    out_dir = Path(args.output_dir or settings.output_dir)

    def value(flag: Any, field: str) -> Any:
        return flag if flag is not None else getattr(settings, field)

    baseline, proposed = params_for_racks(
        racks=value(args.racks, "racks"),
        servers_per_rack=value(args.servers_per_rack, "servers_per_rack"),
        spines=value(args.spines, "spines"),
        spine_w=value(args.spine_watts, "spine_watts"),
        leaf_w=value(args.leaf_watts, "leaf_watts"),
        server_transceiver_w=value(args.server_transceiver_watts, "server_transceiver_watts"),
        owc_transceiver_w=value(args.owc_watts, "owc_watts"),
        owc_transceivers=value(args.owc_transceivers, "owc_transceivers"),
        olt_w=value(args.olt_watts, "olt_watts"),
    )
    report = compare_power(baseline, proposed)

    target = out_dir / f"power.{fmt}"
    if fmt == "json":
        out_dir.mkdir(parents=True, exist_ok=True)
        target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    else:
        rows = [{"metric": f"baseline.{k}", "value": v} for k, v in report.baseline_terms.items()]
        rows.append({"metric": "baseline_total", "value": report.baseline_w})
        rows += [{"metric": f"proposed.{k}", "value": v} for k, v in report.proposed_terms.items()]
        rows.append({"metric": "proposed_total", "value": report.proposed_w})
        rows.append({"metric": "savings", "value": report.savings})
        write_table(rows, POWER_COLUMNS, target, fmt, report.schema_version)
    print(f"power: baseline_w={report.baseline_w!r} proposed_w={report.proposed_w!r} savings={report.savings!r}")
    return 0


def cmd_export_builtin(args: argparse.Namespace, settings: Settings) -> int:
    """导出内置场景 JSON"""
    save_scenario(builtin_scenario(args.name), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="owcdc",
        description="OWC spine-leaf 数据中心仿真器（环境变量前缀 OWCDC_）",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="射线追踪 + 链路预算")
    source = sim.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="场景 JSON 文件")
    source.add_argument("--builtin", choices=["paper"], help="内置场景")
    sim.add_argument("--receiver", choices=["adr", "wfov", "both"])
    sim.add_argument("--max-order", type=int)
    sim.add_argument("--bin-width", type=float, help="时间箱宽度 (s)")
    sim.add_argument("--first-resolution", type=float, help="一阶反射单元边长 (m)")
    sim.add_argument("--second-resolution", type=float, help="二阶反射单元边长 (m)")
    sim.add_argument("--interference", dest="interference", action="store_true", default=None)
    sim.add_argument("--no-interference", dest="interference", action="store_false")
    sim.add_argument("--calibration", help="接收机标定 JSON 文件")
    sim.add_argument("--workers", type=int, help="并行追踪线程数")
    sim.add_argument("--impulse-responses", action="store_true", help="同时写出各链路冲激响应")
    sim.add_argument("--seed", type=int, help="保留参数，当前流程不使用随机数")
    sim.set_defaults(handler=cmd_simulate)

    assign = sub.add_parser("assign", help="AWGR PON 波长分配")
    assign.add_argument("--topology", help="拓扑 JSON 文件")
    assign.add_argument("--nodes", type=int)
    assign.add_argument("--wavelengths", type=int)
    assign.add_argument("--awgrs", type=int)
    assign.add_argument("--validate", help="校验给定的波长矩阵 CSV，而不是求解")
    assign.set_defaults(handler=cmd_assign)

    power = sub.add_parser("power", help="功耗对比")
    power.add_argument("--racks", type=int)
    power.add_argument("--servers-per-rack", type=int)
    power.add_argument("--spines", type=int)
    power.add_argument("--spine-watts", type=float)
    power.add_argument("--leaf-watts", type=float)
    power.add_argument("--server-transceiver-watts", type=float)
    power.add_argument("--owc-watts", type=float)
    power.add_argument("--owc-transceivers", type=int)
    power.add_argument("--olt-watts", type=float)
    power.set_defaults(handler=cmd_power)

    for command in (sim, assign, power):
        command.add_argument("--output-dir")
        command.add_argument("--format", choices=["csv", "json"])

    scenario = sub.add_parser("scenario", help="场景文件工具")
    scenario_sub = scenario.add_subparsers(dest="action", required=True)
    export = scenario_sub.add_parser("export-builtin", help="导出内置场景")
    export.add_argument("--name", default="paper", choices=["paper"])
    export.add_argument("--output", required=True)
    export.set_defaults(handler=cmd_export_builtin)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """返回退出码：0 成功，2 配置错误，3 拓扑不可行或校验失败"""
    try:
        settings = Settings()
    except ValidationError as e:
        print(f"环境变量配置非法: {e}", file=sys.stderr)
        return 2
    setup_logging(settings.log_level, sys.stderr)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    try:
        return args.handler(args, settings)
    except OwcSimError as e:
        logger.error(f"{args.command} 失败: {str(e)}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"{args.command} 参数非法: {str(e)}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
