#!/usr/bin/env python
"""gnse 启动脚本：python gnse.py verify|eig|solve|control ..."""
import sys

from cli.main import main

if __name__ == '__main__':
    sys.exit(main())
