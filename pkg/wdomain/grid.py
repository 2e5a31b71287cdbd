"""单位环面上的加权网格与场"""
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.exceptions import ConstructionError, InputError
from wdomain.stencils import centered_diff


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class WeightedGrid:
    """n×n 周期网格及权函数 g

    m0、M0、grad_g_sup 和 grad_g_over_g 都在构造时由 g 计算。
    analytic_grad_sup 若给出，grad_g_sup 取离散值与解析值中的较大者。
    """

    g: np.ndarray
    analytic_grad_sup: Optional[float] = None

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 3:
            raise ConstructionError("权函数必须是 n×n 数组 (n≥3)", shape=g.shape)
        if not np.all(np.isfinite(g)):
            raise ConstructionError("权函数含有 NaN 或 Inf")
        if np.any(g <= 0):
            raise ConstructionError("权函数必须处处为正", min_value=float(np.min(g)))
        n = g.shape[0]
        h = 1.0 / n
        grad = np.stack([centered_diff(g, 0, h), centered_diff(g, 1, h)])
        grad_sup = float(np.max(np.sqrt(grad[0] ** 2 + grad[1] ** 2)))
        if self.analytic_grad_sup is not None:
            grad_sup = max(grad_sup, float(self.analytic_grad_sup))
        object.__setattr__(self, 'g', _frozen(g))
        object.__setattr__(self, 'grad_g_over_g', _frozen(grad / g))
        object.__setattr__(self, 'grad_g_sup', grad_sup)
        object.__setattr__(self, 'm0', float(np.min(g)))
        object.__setattr__(self, 'M0', float(np.max(g)))

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def is_constant(self) -> bool:
        return self.m0 == self.M0

    def coordinates(self):
        """格点坐标 (x, y)，x 沿第 0 轴"""
        s = np.arange(self.n) * self.h
        return np.meshgrid(s, s, indexing='ij')

    def fingerprint(self) -> str:
        return hashlib.sha256(self.g.tobytes()).hexdigest()

    def check_field(self, field) -> None:
        if field.n != self.n:
            raise InputError("场与网格尺寸不一致", field_n=field.n, grid_n=self.n)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """速度场 (u1, u2)，每个分量按行优先存为 n×n，向量形式按分量拼接"""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = np.array(self.u1, dtype=float)
        u2 = np.array(self.u2, dtype=float)
        if u1.shape != u2.shape or u1.ndim != 2 or u1.shape[0] != u1.shape[1]:
            raise InputError("速度分量必须是相同形状的 n×n 数组", u1=u1.shape, u2=u2.shape)
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
            raise InputError("速度场含有 NaN 或 Inf")
        object.__setattr__(self, 'u1', _frozen(u1))
        object.__setattr__(self, 'u2', _frozen(u2))

    @property
    def n(self) -> int:
        return self.u1.shape[0]

    @property
    def components(self) -> np.ndarray:
        return np.stack([self.u1, self.u2])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u1.ravel(), self.u2.ravel()])

    @classmethod
    def from_vector(cls, vector: np.ndarray, n: int) -> 'VelocityField':
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (2 * n * n,):
            raise InputError("向量长度与网格不匹配", expected=2 * n * n, got=vector.shape)
        return cls(vector[:n * n].reshape(n, n), vector[n * n:].reshape(n, n))

    @classmethod
    def from_components(cls, components: np.ndarray) -> 'VelocityField':
        return cls(components[0], components[1])

    @classmethod
    def zeros(cls, n: int) -> 'VelocityField':
        return cls(np.zeros((n, n)), np.zeros((n, n)))

    def __add__(self, other: 'VelocityField') -> 'VelocityField':
        return VelocityField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: 'VelocityField') -> 'VelocityField':
        return VelocityField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> 'VelocityField':
        return VelocityField(scalar * self.u1, scalar * self.u2)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ScalarField:
    """标量场"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InputError("标量场必须是 n×n 数组", shape=values.shape)
        if not np.all(np.isfinite(values)):
            raise InputError("标量场含有 NaN 或 Inf")
        object.__setattr__(self, 'values', _frozen(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WeightRecipe:
    """权函数配方：constant、sine 或 tabulated"""

    kind: str
    c: float = 1.0
    epsilon: float = 0.0
    table: Optional[np.ndarray] = None

    @classmethod
    def constant(cls, c: float) -> 'WeightRecipe':
        return cls(kind='constant', c=c)

    @classmethod
    def sine(cls, epsilon: float) -> 'WeightRecipe':
        return cls(kind='sine', epsilon=epsilon)

    @classmethod
    def tabulated(cls, table: np.ndarray) -> 'WeightRecipe':
        return cls(kind='tabulated', table=np.asarray(table, dtype=float))


def build_weight(recipe: WeightRecipe, n: int) -> WeightedGrid:
    """按配方构造加权网格

    Args:
        recipe: 权函数配方
        n: 每边格点数

    Returns:
        WeightedGrid 实例
    """
    if int(n) != n or n < 3:
        raise ConstructionError(f"网格尺寸过小: {n}", n=n)
    n = int(n)
    if recipe.kind == 'constant':
        if not recipe.c > 0:
            raise ConstructionError(f"常数权函数必须为正: {recipe.c}", c=recipe.c)
        return WeightedGrid(np.full((n, n), float(recipe.c)), analytic_grad_sup=0.0)
    if recipe.kind == 'sine':
        if not abs(recipe.epsilon) < 1:
            raise ConstructionError(f"正弦权函数要求 |ε|<1: {recipe.epsilon}", epsilon=recipe.epsilon)
        x1 = np.arange(n) * (1.0 / n)
        g = np.repeat((1.0 + recipe.epsilon * np.sin(2.0 * np.pi * x1))[:, None], n, axis=1)
        return WeightedGrid(g, analytic_grad_sup=2.0 * np.pi * abs(recipe.epsilon))
    if recipe.kind == 'tabulated':
        if recipe.table is None:
            raise ConstructionError("tabulated 配方缺少数据表")
        table = np.asarray(recipe.table, dtype=float)
        if table.size != n * n:
            raise ConstructionError("数据表大小与网格不一致", size=table.size, n=n)
        return WeightedGrid(table.reshape(n, n))
    raise ConstructionError(f"无效的权函数配方: {recipe.kind}", kind=recipe.kind)
