"""配置管理模块"""
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用配置"""

    # 射线追踪配置
    first_order_resolution: float = 0.1
    second_order_resolution: float = 0.5
    time_bin_s: float = 1e-10
    max_reflection_order: int = 2
    interference: bool = False
    trace_workers: int = 1

    # 接收机配置
    receiver_kind: str = "adr"
    calibration_file: Optional[str] = None

    # 输出配置
    output_dir: str = "results"
    output_format: str = "csv"

    # 功耗模型配置
    racks: int = 4
    servers_per_rack: int = 32
    spines: int = 4
    spine_watts: float = 660.0
    leaf_watts: float = 508.0
    server_transceiver_watts: float = 3.0
    owc_watts: float = 0.4
    owc_transceivers: Optional[int] = None  # 缺省为 2 × 机架数
    olt_watts: float = 480.0

    # PON 配置
    pon_wavelengths: int = 4
    pon_awgrs: int = 2

    # 服务配置
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    log_level: str = "INFO"

    class Config:
        env_file = ".env"
        env_prefix = "OWCDC_"
        case_sensitive = False


settings = Settings()
