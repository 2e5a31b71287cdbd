"""命令输出：manifest、H(g) 结论、控制记录"""
import json
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from cli.config import RunConfig
from control.optimizer import ControlIterate
from fracops.grid import TimeGrid
from wdomain.field_io import write_frame
from wdomain.operators import HgVerdict

VERSION = '1.0.0'


def _plain(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def write_manifest(directory: str, run: RunConfig, extras: Dict[str, object]) -> str:
    """扁平 JSON：全部配置键加上版本、α₁、b、ν′ 与耗时"""
    manifest = {key: _plain(value) for key, value in run.flat().items()}
    manifest['version'] = VERSION
    manifest.update({key: _plain(value) for key, value in extras.items()})
    path = os.path.join(directory, 'manifest.json')
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(json.dumps(manifest, sort_keys=True, indent=2))
        handle.write('\n')
    return path


def write_hg_check(directory: str, verdict: HgVerdict) -> str:
    """`key=value` 逐行写出，布尔值写作 true/false"""
    path = os.path.join(directory, 'hg_check.txt')
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for key, value in verdict.as_dict().items():
            text = str(value).lower() if isinstance(value, bool) else repr(float(value))
            handle.write(f'{key}={text}\n')
    return path


def control_log_frame(log: List[ControlIterate]) -> pd.DataFrame:
    return pd.DataFrame({
        'iter': [item.iteration for item in log],
        'J': [item.J for item in log],
        'grad_norm': [item.grad_norm for item in log],
        'step': [item.step for item in log],
        'state_residual': [item.state_residual for item in log],
    })


def control_frame(w: np.ndarray, time: TimeGrid) -> pd.DataFrame:
    """`t,comp,value`，t 为时间单元左端点，comp 从 1 开始"""
    n_cells, d_c = w.shape
    return pd.DataFrame({
        't': np.repeat(time.times[:n_cells], d_c),
        'comp': np.tile(np.arange(1, d_c + 1), n_cells),
        'value': w.ravel(),
    })


def write_csv(frame: pd.DataFrame, directory: str, name: str) -> str:
    return write_frame(frame, os.path.join(directory, name))


def print_report(title: str, rows: Dict[str, object], footer: Optional[str] = None) -> None:
    print(f"\n📊 {title}")
    print("=" * 50)
    for key, value in rows.items():
        print(f"{key}: {value}")
    if footer:
        print(footer)
