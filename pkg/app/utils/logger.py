"""日志配置模块"""
import sys
from typing import Any, Optional

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def setup_logging(level: str = "INFO", sink: Optional[Any] = None) -> None:
    """重置 loguru 输出；API 默认写 stdout，CLI 传入 stderr"""
    logger.remove()
    logger.add(sink if sink is not None else sys.stdout, format=LOG_FORMAT, level=level.upper())
