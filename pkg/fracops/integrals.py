"""Riemann-Liouville 积分与右侧导数、分数阶 Gronwall 界、分部积分残差

所有积分均采用乘积积分：被积函数取分段线性插值，核的矩精确计算。
"""
from typing import Union

import numpy as np
from scipy.integrate import simpson
from scipy.special import gamma

from fracops.caputo import caputo_l1_series
from fracops.grid import FractionalOrder, SampledFunction
from utils.exceptions import DomainError, InputError

Scalar = Union[float, np.ndarray]


def kernel_eval(order: FractionalOrder, t: float) -> float:
    """Riemann-Liouville 核 k_α(t) = t^(α−1)/Γ(α)

    Args:
        order: 分数阶 α
        t: 正的时间

    Returns:
        核函数值
    """
    if not t > 0:
        raise DomainError(f"核函数只在 t>0 上有定义: t={t}", t=t, alpha=order.alpha)
    return float(t ** (order.alpha - 1.0) / gamma(order.alpha))


def product_weights(beta: float, n: int) -> np.ndarray:
    """乘积积分权重 w_0..w_n，使 I^β f(t_n) ≈ dt^β/Γ(β+2)·Σ w_j f_j

    β=0 时退化为 w = (0, …, 0, 1)，即恒等算子。
    """
    w = np.zeros(n + 1)
    if n == 0:
        return w
    p = beta + 1.0
    w[0] = (n - 1.0) ** p - (n - beta - 1.0) * n ** beta
    if n > 1:
        k = n - np.arange(1, n, dtype=float)
        w[1:n] = (k + 1.0) ** p - 2.0 * k ** p + (k - 1.0) ** p
    w[n] = 1.0
    return w


def _left_integral(beta: float, values: np.ndarray, dt: float, n: int) -> Scalar:
    if n == 0:
        return np.zeros_like(values[0]) if values.ndim > 1 else 0.0
    w = product_weights(beta, n)
    return dt ** beta / gamma(beta + 2.0) * np.tensordot(w, values[:n + 1], axes=1)


def _right_integral_all(beta: float, values: np.ndarray, dt: float) -> np.ndarray:
    """所有网格点上的右侧积分 ∫_{t_n}^T k_β(s−t_n) ψ(s) ds"""
    n_steps = values.shape[0] - 1
    reversed_values = values[::-1]
    out = np.zeros_like(values)
    for n in range(n_steps + 1):
        out[n] = _left_integral(beta, reversed_values, dt, n_steps - n)
    return out


def _right_derivative_all(beta: float, values: np.ndarray, dt: float) -> np.ndarray:
    """−d/dt 作用在右侧积分上；内点中心差分，两端二阶单侧差分"""
    n_steps = values.shape[0] - 1
    if n_steps < 2:
        raise InputError("右侧导数至少需要两个时间步", n_steps=n_steps)
    J = _right_integral_all(beta, values, dt)
    out = np.empty_like(J)
    out[1:-1] = -(J[2:] - J[:-2]) / (2.0 * dt)
    out[0] = -(-3.0 * J[0] + 4.0 * J[1] - J[2]) / (2.0 * dt)
    out[-1] = -(3.0 * J[-1] - 4.0 * J[-2] + J[-3]) / (2.0 * dt)
    return out


def rl_integral_left(order: FractionalOrder, f: SampledFunction, n: int) -> Scalar:
    """左 Riemann-Liouville 积分 ∫₀^{t_n} k_α(t_n−s) f(s) ds

    Args:
        order: 积分阶 α
        f: 网格上的采样函数
        n: 步号，n=0 时返回 0

    Returns:
        积分近似值（f 为向量值时按分量返回）
    """
    n = f.grid.check_index(n)
    return _left_integral(order.alpha, f.values, f.grid.dt, n)


def rl_integral_right(order: FractionalOrder, psi: SampledFunction, n: int) -> Scalar:
    """右 Riemann-Liouville 积分 ∫_{t_n}^T k_α(s−t_n) ψ(s) ds，n=n_steps 时返回 0"""
    n = psi.grid.check_index(n)
    n_steps = psi.grid.n_steps
    return _left_integral(order.alpha, psi.values[::-1], psi.grid.dt, n_steps - n)


def rl_derivative_right(order: FractionalOrder, psi: SampledFunction, n: int) -> Scalar:
    """右 Riemann-Liouville 导数 −d/dt ∫_t^T k_{1−α}(s−t) ψ(s) ds

    内层积分用乘积积分，外层导数用中心差分；n=0 处改用二阶前向差分。

    Args:
        order: 导数阶 α
        psi: 整个网格上的采样
        n: 步号，0 ≤ n < n_steps

    Returns:
        导数近似值
    """
    grid = psi.grid
    if n == grid.n_steps:
        raise DomainError("终点处没有可用的差分模板", n=n, n_steps=grid.n_steps)
    n = grid.check_index(n, upper=grid.n_steps - 1)
    if grid.n_steps < 2:
        raise InputError("右侧导数至少需要两个时间步", n_steps=grid.n_steps)
    beta = 1.0 - order.alpha
    reversed_values = psi.values[::-1]

    def inner(k: int) -> Scalar:
        return _left_integral(beta, reversed_values, grid.dt, grid.n_steps - k)

    if n == 0:
        return -(-3.0 * inner(0) + 4.0 * inner(1) - inner(2)) / (2.0 * grid.dt)
    return -(inner(n + 1) - inner(n - 1)) / (2.0 * grid.dt)


def gronwall_bound(gamma_order: FractionalOrder, v0: float, c2: SampledFunction, n: int) -> float:
    """分数阶 Gronwall 界 v0 + (1/Γ(γ))∫₀^{t_n}(t_n−s)^{γ−1} c2(s) ds

    采用源项形式，即后续能量估计真正使用的形式。

    Args:
        gamma_order: 阶数 γ
        v0: 初值，非负
        c2: 非负源项采样
        n: 步号

    Returns:
        上界值
    """
    if v0 < 0:
        raise InputError(f"初值必须非负: {v0}", v0=v0)
    if np.any(c2.values < 0):
        first = int(np.argmax(c2.values < 0))
        raise InputError("源项出现负值", index=first, value=float(c2.values[first]))
    return float(v0 + rl_integral_left(gamma_order, c2, n))


def _pointwise_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return a * b
    return np.sum(a * b, axis=tuple(range(1, a.ndim)))


def ibp_residual(order: FractionalOrder, u: SampledFunction, psi: SampledFunction) -> float:
    """分数阶分部积分公式的残差

    |∫(∂^α u)ψ − ∫u·(_tD_T^α ψ) + u(0)·(_0I_T^{1−α} ψ)|，时间积分用 Simpson 公式。

    Args:
        order: 阶数 α
        u: 光滑函数采样
        psi: 在 T 处为零的检验函数采样

    Returns:
        残差的绝对值
    """
    if u.grid != psi.grid:
        raise InputError("u 与 psi 的时间网格不一致")
    if u.values.shape != psi.values.shape:
        raise InputError("u 与 psi 的形状不一致", u=u.values.shape, psi=psi.values.shape)
    scale = max(float(np.max(np.abs(psi.values))), 1.0)
    if np.max(np.abs(psi.values[-1])) > 1e-12 * scale:
        raise InputError("检验函数在 T 处必须为零", psi_T=psi.values[-1])

    dt = u.grid.dt
    beta = 1.0 - order.alpha
    caputo = caputo_l1_series(order, u)
    right_derivative = _right_derivative_all(beta, psi.values, dt)
    boundary = _left_integral(beta, psi.values[::-1], dt, u.grid.n_steps)

    first = simpson(_pointwise_dot(caputo, psi.values), dx=dt)
    second = simpson(_pointwise_dot(u.values, right_derivative), dx=dt)
    boundary_term = float(np.sum(u.values[0] * boundary))
    return float(abs(first - second + boundary_term))
