"""Caputo 导数的 L1 离散"""
from typing import Union

import numpy as np

from fracops.grid import FractionalOrder, SampledFunction
from utils.exceptions import DomainError, InputError


def l1_weights(order: FractionalOrder, n: int) -> np.ndarray:
    """L1 格式权重 b_j = (j+1)^(1−α) − j^(1−α)，j = 0..n−1

    Args:
        order: 分数阶 α
        n: 权重个数，n ≥ 1

    Returns:
        长度为 n 的权重数组，b_0 = 1
    """
    if int(n) != n or n < 1:
        raise InputError(f"L1 权重个数必须为正整数: {n}", n=n)
    j = np.arange(int(n), dtype=float)
    p = 1.0 - order.alpha
    b = (j + 1.0) ** p - j ** p
    # α=1 时 0^0 按 1 计算会把 b_0 清零
    b[0] = 1.0
    return b


def _l1_sum(order: FractionalOrder, weights: np.ndarray, values: np.ndarray, dt: float, n: int):
    # diffs[i] = ξ^{i+1} − ξ^i，按 j 的固定顺序与 b_j 配对
    diffs = values[1:n + 1] - values[:n]
    scale = dt ** (-order.alpha) / order.gamma_2_minus_alpha
    return scale * np.tensordot(weights[:n], diffs[::-1], axes=1)


def caputo_l1_apply(order: FractionalOrder, history: SampledFunction, n: int) -> Union[float, np.ndarray]:
    """t_n 处的 L1 Caputo 导数

    (dt^{−α}/Γ(2−α)) Σ_{j=0}^{n−1} b_j (ξ^{n−j} − ξ^{n−j−1})；α=1 时即后向差分。

    Args:
        order: 分数阶 α
        history: 至少包含 ξ⁰..ξⁿ 的采样
        n: 步号，n ≥ 1

    Returns:
        导数近似值
    """
    if n == 0:
        raise DomainError("L1 格式在 n=0 处没有定义", n=n)
    n = history.grid.check_index(n)
    weights = l1_weights(order, n)
    result = _l1_sum(order, weights, history.values, history.grid.dt, n)
    return float(result) if np.ndim(result) == 0 else result


def caputo_l1_series(order: FractionalOrder, history: SampledFunction) -> np.ndarray:
    """所有网格点上的 L1 Caputo 导数

    n=0 处：α<1 时取 0（光滑函数的 Caputo 导数在 0 点为零），α=1 时取前向差分。
    """
    values = history.values
    n_steps = history.grid.n_steps
    dt = history.grid.dt
    weights = l1_weights(order, n_steps)
    out = np.zeros_like(values)
    for n in range(1, n_steps + 1):
        out[n] = _l1_sum(order, weights, values, dt, n)
    if order.is_classical:
        out[0] = (values[1] - values[0]) / dt
    return out


def caputo_energy_gap(order: FractionalOrder, history: SampledFunction) -> np.ndarray:
    """离散能量不等式 ξⁿ·∂^α ξⁿ − ½∂^α|ξ|²ⁿ 的取值，n = 1..n_steps

    L1 权重为正且单调递减时该量非负。
    """
    values = history.values
    squared = values ** 2 if values.ndim == 1 else np.sum(values ** 2, axis=1)
    derivative = caputo_l1_series(order, history)
    energy_derivative = caputo_l1_series(order, SampledFunction(history.grid, squared))
    if values.ndim == 1:
        inner = values * derivative
    else:
        inner = np.sum(values * derivative, axis=1)
    return (inner - 0.5 * energy_derivative)[1:]
