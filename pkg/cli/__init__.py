# cli包初始化文件：配置解析与 gnse 子命令
from .writers import VERSION
from .config import RunConfig, parse_config
from .commands import (
    EXIT_CERTIFICATE,
    EXIT_ERROR,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    cmd_control,
    cmd_eig,
    cmd_solve,
)
from .main import cmd_verify, main

__version__ = VERSION

__all__ = [
    'EXIT_CERTIFICATE',
    'EXIT_ERROR',
    'EXIT_HYPOTHESIS',
    'EXIT_OK',
    'RunConfig',
    'VERSION',
    'cmd_control',
    'cmd_eig',
    'cmd_solve',
    'cmd_verify',
    'main',
    'parse_config',
]
