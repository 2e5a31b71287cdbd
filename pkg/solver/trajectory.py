"""Galerkin 系数轨迹及其诊断量"""
import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from fracops.grid import TimeGrid
from utils.exceptions import InputError


def _frozen(array, dtype=float) -> np.ndarray:
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Trajectory:
    """完整的系数历史 ξ⁰..ξⁿ、强迫系数 η 以及逐步诊断

    energy = |ξ|²，enstrophy = Σ λ_k ξ_k²；未提供的 Picard 诊断记为 0。
    """

    time: TimeGrid
    xi: np.ndarray
    eta: np.ndarray
    lambdas: np.ndarray
    picard_iters: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None
    system_fingerprint: str = ''
    input_hash: str = field(init=False, default='')

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        eta = np.array(self.eta, dtype=float)
        lambdas = np.array(self.lambdas, dtype=float)
        rows = self.time.n_steps + 1
        if xi.ndim != 2 or xi.shape[0] != rows:
            raise InputError("轨迹长度与时间网格不一致", expected=rows, got=xi.shape)
        if eta.shape != xi.shape or lambdas.shape != (xi.shape[1],):
            raise InputError("轨迹、强迫与特征值的尺寸不一致", xi=xi.shape, eta=eta.shape, lambdas=lambdas.shape)
        if not np.all(np.isfinite(xi)):
            raise InputError("轨迹中含有 NaN 或 Inf")
        iters = np.zeros(rows, dtype=int) if self.picard_iters is None else self.picard_iters
        residual = np.zeros(rows) if self.residual is None else self.residual
        object.__setattr__(self, 'xi', _frozen(xi))
        object.__setattr__(self, 'eta', _frozen(eta))
        object.__setattr__(self, 'lambdas', _frozen(lambdas))
        object.__setattr__(self, 'picard_iters', _frozen(iters, dtype=int))
        object.__setattr__(self, 'residual', _frozen(residual))
        object.__setattr__(self, 'input_hash', self._hash_inputs())

    def _hash_inputs(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.float64(self.time.dt).tobytes())
        digest.update(np.int64(self.time.n_steps).tobytes())
        for array in (self.xi, self.eta, self.lambdas):
            digest.update(array.tobytes())
        digest.update(self.system_fingerprint.encode('utf-8'))
        return digest.hexdigest()

    @property
    def m(self) -> int:
        return self.xi.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.time.times

    @property
    def energy(self) -> np.ndarray:
        return np.sum(self.xi ** 2, axis=1)

    @property
    def enstrophy(self) -> np.ndarray:
        return self.xi ** 2 @ self.lambdas

    def to_trajectory_frame(self) -> pd.DataFrame:
        """长表格式 `t,k,xi`，k 从 1 开始"""
        rows = self.time.n_steps + 1
        return pd.DataFrame({
            't': np.repeat(self.times, self.m),
            'k': np.tile(np.arange(1, self.m + 1), rows),
            'xi': self.xi.ravel(),
        })

    def to_diagnostics_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'picard_iters': self.picard_iters,
            'residual': self.residual,
            'energy': self.energy,
            'enstrophy': self.enstrophy,
        })
