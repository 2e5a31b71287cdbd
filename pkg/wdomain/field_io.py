"""场的 CSV 读写，统一使用 17 位有效数字与 LF 换行"""
import os

import numpy as np
import pandas as pd

from utils.exceptions import InputError
from wdomain.grid import ScalarField, VelocityField

FLOAT_FORMAT = '%.17g'


def write_frame(frame: pd.DataFrame, path: str) -> str:
    """以固定格式写出 DataFrame，返回写出的路径"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _coordinate_columns(n: int):
    s = np.arange(n) / n
    x, y = np.meshgrid(s, s, indexing='ij')
    return x.ravel(), y.ravel()


def velocity_to_frame(field: VelocityField) -> pd.DataFrame:
    x, y = _coordinate_columns(field.n)
    return pd.DataFrame({'x': x, 'y': y, 'u1': field.u1.ravel(), 'u2': field.u2.ravel()})


def scalar_to_frame(field: ScalarField) -> pd.DataFrame:
    x, y = _coordinate_columns(field.n)
    return pd.DataFrame({'x': x, 'y': y, 'value': field.values.ravel()})


def _rows_to_grid(frame: pd.DataFrame, column: str) -> np.ndarray:
    count = len(frame)
    n = int(round(np.sqrt(count)))
    if n * n != count:
        raise InputError("CSV 行数不是完全平方数", rows=count)
    # 按坐标排序后恢复行优先排列
    ordered = frame.sort_values(['x', 'y'], kind='mergesort')
    return ordered[column].to_numpy(dtype=float).reshape(n, n)


def read_scalar_csv(path: str) -> ScalarField:
    """读取 `x,y,value` 格式的标量场"""
    frame = pd.read_csv(path)
    missing = {'x', 'y', 'value'} - set(frame.columns)
    if missing:
        raise InputError("标量场 CSV 缺少列", path=path, missing=sorted(missing))
    return ScalarField(_rows_to_grid(frame, 'value'))


def read_velocity_csv(path: str) -> VelocityField:
    """读取 `x,y,u1,u2` 格式的速度场"""
    frame = pd.read_csv(path)
    missing = {'x', 'y', 'u1', 'u2'} - set(frame.columns)
    if missing:
        raise InputError("速度场 CSV 缺少列", path=path, missing=sorted(missing))
    return VelocityField(_rows_to_grid(frame, 'u1'), _rows_to_grid(frame, 'u2'))
