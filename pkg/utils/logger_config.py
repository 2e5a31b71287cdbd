import functools
import logging
import os
import time
from logging.handlers import RotatingFileHandler

from dotenv import load_dotenv

# 加载.env文件
load_dotenv()

# 项目根目录
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
LOG_DIR = os.path.join(PROJECT_ROOT, 'logs')


def _default_log_file():
    """日志文件路径，GNSE_LOG_FILE 为空字符串时关闭文件日志"""
    env_file = os.getenv('GNSE_LOG_FILE')
    if env_file is not None:
        if env_file and os.path.dirname(env_file):
            os.makedirs(os.path.dirname(env_file), exist_ok=True)
        return env_file or None
    os.makedirs(LOG_DIR, exist_ok=True)
    return os.path.join(LOG_DIR, 'gnse.log')


# 默认日志配置
DEFAULT_LOG_CONFIG = {
    'level': os.getenv('GNSE_LOG_LEVEL', 'INFO').upper(),
    'file': _default_log_file(),
    'max_bytes': 10 * 1024 * 1024,  # 10MB
    'backup_count': 5
}


def setup_logger(name=None, log_config=None):
    """
    设置日志配置

    Args:
        name: 日志器名称
        log_config: 日志配置字典，如果为None则使用默认配置

    Returns:
        配置好的logger实例
    """
    config = log_config or DEFAULT_LOG_CONFIG
    level = getattr(logging, config['level'], logging.INFO)

    logger = logging.getLogger(name) if name else logging.getLogger()
    logger.setLevel(level)

    # 防止重复添加处理器
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if config.get('file'):
        file_handler = RotatingFileHandler(
            config['file'],
            maxBytes=config['max_bytes'],
            backupCount=config['backup_count'],
            encoding='utf-8'
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    # 交给本模块的处理器输出，避免根日志器重复打印
    logger.propagate = False
    return logger


def get_logger(name=None):
    """
    获取已配置的logger实例

    Args:
        name: 日志器名称

    Returns:
        logger实例
    """
    logger = logging.getLogger(name)
    if not logger.handlers:
        setup_logger(name)
    return logger


def log_error(func):
    """
    错误日志装饰器：记录执行耗时，异常时写入完整堆栈后重新抛出

    Args:
        func: 被装饰的函数

    Returns:
        装饰后的函数
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)
        start_time = time.time()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.error(f"{func.__name__} 执行失败: {e}", exc_info=True)
            raise
        execution_time = time.time() - start_time
        if execution_time > 0.5:
            logger.debug(f"{func.__name__} 耗时 {execution_time:.4f} 秒")
        return result

    return wrapper


def log_with_context(logger, level, message, **context):
    """
    带上下文的日志记录

    Args:
        logger: logger实例
        level: 日志级别
        message: 日志消息
        **context: 上下文信息，将作为键值对添加到日志中
    """
    context_str = ' '.join(f'{k}={v}' for k, v in context.items())
    full_message = f"{message} [{context_str}]" if context_str else message
    log_fn = getattr(logger, level, None)
    if log_fn is None:
        log_fn = logger.info
    log_fn(full_message)
