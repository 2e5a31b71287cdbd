"""gnse 命令行入口"""
import argparse
import sys
from typing import List, Optional

import pandas as pd

from cli.commands import EXIT_ERROR, EXIT_OK, cmd_control, cmd_eig, cmd_solve, run_guarded
from cli.config import RunConfig, defaults_help, parse_config
from cli.verify_suite import run_checks
from utils.exceptions import ConfigError
from utils.logger_config import get_logger

logger = get_logger(__name__)

COMMANDS = {
    'eig': cmd_eig,
    'solve': cmd_solve,
    'control': cmd_control,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='gnse',
        description='时间分数阶 g-Navier-Stokes 方程的 Faedo-Galerkin 求解工具',
        epilog=defaults_help() + '\n\n环境变量: GNSE_OUT 覆盖输出目录; GNSE_LOG_LEVEL, GNSE_LOG_FILE 配置日志',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    verify = subparsers.add_parser('verify', help='运行不变量检查集')
    verify.add_argument('--filter', default=None, help='只运行名称以此开头的检查，例如 fracops')
    verify.add_argument('--full', action='store_true', help='加入 n=64 的谱与 Ladyzhenskaya 检查')
    verify.add_argument('--config', default=None, help='可选的 INI 配置，追加在该配置上运行的 config.* 检查')

    for name, text in (('eig', '计算 g-Stokes 特征基'), ('solve', '前向求解并核验能量证书'), ('control', '求解最优控制问题')):
        sub = subparsers.add_parser(name, help=text, epilog=defaults_help(),
                                    formatter_class=argparse.RawDescriptionHelpFormatter)
        sub.add_argument('--config', required=True, help='INI 配置文件路径')
    return parser


def cmd_verify(name_filter: Optional[str] = None, full: bool = False, run: Optional[RunConfig] = None) -> int:
    """打印检查表，全部通过时返回 0"""
    table = run_checks(name_filter, full=full, run=run)
    if table.empty:
        print(f"❌ 没有匹配 {name_filter} 的检查")
        return EXIT_ERROR
    with pd.option_context('display.max_rows', None, 'display.width', 200, 'display.max_colwidth', None):
        print(table.to_string(index=False, float_format=lambda value: f'{value:.6g}'))
    passed = int(table['passed'].sum())
    print("=" * 50)
    print(f"通过 {passed}/{len(table)}")
    return EXIT_OK if passed == len(table) else EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run = None
    if args.config is not None:
        try:
            run = parse_config(args.config)
        except ConfigError as e:
            where = f" (第 {e.line} 行)" if e.line else ''
            print(f"❌ 配置错误{where}: {e.message}")
            return EXIT_ERROR
    if args.command == 'verify':
        return cmd_verify(args.filter, full=args.full, run=run)
    return run_guarded(COMMANDS[args.command], run)


if __name__ == '__main__':
    sys.exit(main())
