"""特征基导出：spectrum.csv 与每个模式一个场文件"""
import os
from typing import List

import numpy as np
import pandas as pd

from spectral.eigenbasis import GStokesBasis
from wdomain.field_io import velocity_to_frame, write_frame


def spectrum_frame(basis: GStokesBasis) -> pd.DataFrame:
    return pd.DataFrame({'k': np.arange(1, basis.m + 1), 'lambda': basis.lambdas})


def export_basis(basis: GStokesBasis, directory: str) -> List[str]:
    """写出 spectrum.csv 和 mode_001.csv … ，返回写出的文件列表"""
    written = [write_frame(spectrum_frame(basis), os.path.join(directory, 'spectrum.csv'))]
    for k in range(basis.m):
        path = os.path.join(directory, f'mode_{k + 1:03d}.csv')
        written.append(write_frame(velocity_to_frame(basis.mode(k)), path))
    return written
