"""几何工具模块 - 方向向量与角度换算"""
import math
from typing import Tuple

import numpy as np


def branch_direction(azimuth_deg: float, elevation_deg: float) -> Tuple[float, float, float]:
    """
    由方位角/俯角求发射支路的单位指向。

    方位角自 +x 轴逆时针计量，俯角自水平面向下计量（天花板器件朝下发射）。
    """
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return (
        math.cos(el) * math.cos(az),
        math.cos(el) * math.sin(az),
        -math.sin(el),
    )


def unit(vector: np.ndarray) -> np.ndarray:
    """归一化；零向量返回自身"""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        return vector
    return vector / norm


def angle_between_deg(a: np.ndarray, b: np.ndarray) -> float:
    """两向量夹角（度）"""
    cosine = float(np.dot(unit(a), unit(b)))
    return math.degrees(math.acos(max(-1.0, min(1.0, cosine))))
