"""异常定义模块"""


class OwcSimError(Exception):
    """仿真器异常基类"""

    exit_code: int = 1


class ConfigurationError(OwcSimError, ValueError):
    """配置错误：尺寸、分辨率、覆盖参数或场景文件非法"""

    exit_code = 2


class GeometryError(OwcSimError, ValueError):
    """几何错误：收发位置重合等"""

    exit_code = 2


class DomainError(OwcSimError, ValueError):
    """取值域错误：负功率、越界端口、零基准功率等"""

    exit_code = 2


class InfiniteSnrError(DomainError):
    """总噪声方差为 0，信噪比无界"""


class NoSignalError(DomainError):
    """冲激响应总功率为 0，时延扩展无定义"""


class InfeasibleTopologyError(ConfigurationError):
    """拓扑不可行：节点缺少端口或波长分配校验失败"""

    exit_code = 3
