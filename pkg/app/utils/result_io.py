"""结果文件读写模块 - 带 schema_version 的 CSV / JSON 表格"""
import csv
import io
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from app.errors import ConfigurationError

SCHEMA_PREFIX = "# schema_version: "
MATRIX_CORNER = "Sender\\Receiver"


def format_cell(value: Any) -> str:
    """CSV 单元格：浮点用 repr 保证可逆，None 为空串"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], schema_version: str) -> str:
    buffer = io.StringIO()
    buffer.write(f"{SCHEMA_PREFIX}{schema_version}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def render_json(rows: Sequence[Dict[str, Any]], columns: Sequence[str], schema_version: str) -> str:
    payload = {
        "schema_version": schema_version,
        "rows": [{column: _json_value(row.get(column)) for column in columns} for row in rows],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def _json_value(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    return value


def write_table(
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    path: Union[str, Path],
    fmt: str,
    schema_version: str,
) -> Path:
    """按格式写出表格；同样的输入总是得到逐字节相同的文件"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        text = render_csv(rows, columns, schema_version)
    elif fmt == "json":
        text = render_json(rows, columns, schema_version)
    else:
        raise ConfigurationError(f"不支持的输出格式: {fmt}")
    target.write_text(text, encoding="utf-8")
    return target


def parse_csv(text: str) -> Tuple[Optional[str], List[str], List[Dict[str, str]]]:
    """解析带 schema 注释行的 CSV，返回 (schema_version, 列名, 行)"""
    lines = text.splitlines()
    schema_version = None
    if lines and lines[0].startswith(SCHEMA_PREFIX):
        schema_version = lines[0][len(SCHEMA_PREFIX):].strip()
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise ConfigurationError("CSV 文件缺少表头")
    rows = [dict(zip(columns, values)) for values in reader if values]
    return schema_version, columns, rows


def read_table(path: Union[str, Path]) -> Tuple[Optional[str], List[str], List[Dict[str, Any]]]:
    """读取 write_table 写出的文件"""
    target = Path(path)
    try:
        text = target.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"无法读取结果文件 {target}: {e}") from e
    if target.suffix == ".json":
        payload = json.loads(text)
        rows = payload.get("rows", [])
        columns = list(rows[0].keys()) if rows else []
        return payload.get("schema_version"), columns, rows
    return parse_csv(text)


def render_matrix_csv(
    matrix: Dict[str, Dict[str, int]], nodes: Sequence[str], schema_version: str = "assignment_matrix.v1"
) -> str:
    """波长矩阵布局：对角线为 "-"，其余为 λk，未分配为空"""
    buffer = io.StringIO()
    buffer.write(f"{SCHEMA_PREFIX}{schema_version}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([MATRIX_CORNER, *nodes])
    for sender in nodes:
        cells = []
        for receiver in nodes:
            if sender == receiver:
                cells.append("-")
            else:
                label = matrix.get(sender, {}).get(receiver)
                cells.append("" if label is None else f"λ{label}")
        writer.writerow([sender, *cells])
    return buffer.getvalue()


def write_matrix_csv(matrix: Dict[str, Dict[str, int]], nodes: Sequence[str], path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(render_matrix_csv(matrix, nodes), encoding="utf-8")
    return target


def _parse_label(cell: str) -> int:
    text = cell.strip()
    for prefix in ("λ", "L", "l"):
        if text.startswith(prefix):
            text = text[len(prefix):]
            break
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"无法识别的波长单元格: {cell!r}")


def parse_matrix_csv(text: str) -> Tuple[List[str], Dict[str, Dict[str, int]]]:
    """解析波长矩阵 CSV，单元格接受 λk、Lk 或 k"""
    _, columns, rows = parse_csv(text)
    if len(columns) < 2:
        raise ConfigurationError("波长矩阵至少需要两个节点列")
    nodes = [c.strip() for c in columns[1:]]
    matrix: Dict[str, Dict[str, int]] = {}
    for row in rows:
        sender = row[columns[0]].strip()
        entries: Dict[str, int] = {}
        for column, receiver in zip(columns[1:], nodes):
            cell = (row.get(column) or "").strip()
            if not cell or cell == "-" or receiver == sender:
                continue
            entries[receiver] = _parse_label(cell)
        matrix[sender] = entries
    return nodes, matrix


def read_matrix_csv(path: Union[str, Path]) -> Tuple[List[str], Dict[str, Dict[str, int]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"无法读取波长矩阵 {path}: {e}") from e
    return parse_matrix_csv(text)
