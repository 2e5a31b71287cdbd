"""分数阶运算的基本类型：阶数、均匀时间网格和网格上的采样函数"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma

from utils.exceptions import DomainError, InputError


@dataclass(frozen=True)
class FractionalOrder:
    """分数阶 α ∈ (0, 1]"""

    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or not 0.0 < alpha <= 1.0:
            raise DomainError(f"分数阶必须位于 (0, 1] 内: {self.alpha}", alpha=self.alpha)
        object.__setattr__(self, 'alpha', alpha)

    @property
    def is_classical(self) -> bool:
        return self.alpha == 1.0

    @property
    def gamma_2_minus_alpha(self) -> float:
        """L1 格式的归一化常数 Γ(2−α)"""
        return float(gamma(2.0 - self.alpha))


@dataclass(frozen=True)
class TimeGrid:
    """[0, T] 上的均匀网格，t_j = j·dt"""

    dt: float
    n_steps: int

    def __post_init__(self):
        dt = float(self.dt)
        if not math.isfinite(dt) or dt <= 0.0:
            raise InputError(f"时间步长必须为正: {self.dt}", dt=self.dt)
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InputError(f"时间步数必须为正整数: {self.n_steps}", n_steps=self.n_steps)
        object.__setattr__(self, 'dt', dt)
        object.__setattr__(self, 'n_steps', int(self.n_steps))

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> 'TimeGrid':
        """由终止时刻和步长构造，要求 T/dt 为整数"""
        if dt <= 0 or T <= 0:
            raise InputError("T 与 dt 必须为正", T=T, dt=dt)
        n_steps = int(round(T / dt))
        if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
            raise InputError(f"T={T} 不是 dt={dt} 的整数倍", T=T, dt=dt)
        return cls(dt=T / n_steps, n_steps=n_steps)

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1, dtype=float) * self.dt

    def check_index(self, n: int, upper: Optional[int] = None) -> int:
        upper = self.n_steps if upper is None else upper
        if int(n) != n or not 0 <= n <= upper:
            raise InputError(f"步号越界: {n}", n=n, n_steps=self.n_steps)
        return int(n)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """时间网格上的标量或向量值采样，values 的第一维长度为 n_steps+1"""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 0 or values.shape[0] != self.grid.n_steps + 1:
            raise InputError(
                "采样长度与时间网格不匹配",
                expected=self.grid.n_steps + 1,
                got=values.shape[0] if values.ndim else 0,
            )
        if not np.all(np.isfinite(values)):
            raise InputError("采样值中含有 NaN 或 Inf")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_callable(cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> 'SampledFunction':
        return cls(grid, np.asarray(fn(grid.times), dtype=float))

    @property
    def is_vector(self) -> bool:
        return self.values.ndim > 1
