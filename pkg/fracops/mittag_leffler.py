"""Mittag-Leffler 函数 E_α(z) 的求值

交错级数在 |z| 较大时抵消严重，因此在 mpmath 中按所需位数提高精度后求和。
负实轴上 |z|^{1/α} 很大时改用渐近展开，此时级数所需位数与项数都不现实。
"""
import math
from typing import Iterable

import mpmath
import numpy as np

from fracops.grid import FractionalOrder
from utils.exceptions import DomainError, UnsupportedRangeError

# 级数求值的适用窗口
ML_WINDOW = 50.0
# 截断余项上界
ML_REMAINDER = 1e-13
# 正实轴上 E_α(z) ≈ exp(|z|^{1/α})/α，超过后结果超出双精度范围
ML_GROWTH_BUDGET = 700.0
# 负实轴上 |z|^{1/α} 超过此值时使用渐近展开，舍去部分约为 exp(−|z|^{1/α})
ML_ASYMPTOTIC_SWITCH = 100.0
ML_MAX_TERMS = 200000
ML_ASYMPTOTIC_DPS = 40


def mittag_leffler(order: FractionalOrder, z: float) -> float:
    """E_α(z) = Σ_k z^k/Γ(αk+1)

    截断准则：当相邻项之比 r < 1 后比值单调递减，剩余项之和不超过 |t_{k+1}|/(1−r_{k+1})，
    该上界低于 ML_REMAINDER 时停止。

    Args:
        order: 阶数 α
        z: 实数自变量，|z| ≤ 50

    Returns:
        函数值
    """
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"自变量必须有限: {z}", z=z)
    if abs(z) > ML_WINDOW:
        raise UnsupportedRangeError(f"|z| 超出级数窗口 {ML_WINDOW}", z=z)
    if z == 0.0:
        return 1.0

    alpha = order.alpha
    growth = abs(z) ** (1.0 / alpha)
    if z < 0.0 and alpha < 1.0 and growth > ML_ASYMPTOTIC_SWITCH:
        return _negative_asymptotic(alpha, -z)
    if growth > ML_GROWTH_BUDGET:
        raise UnsupportedRangeError("结果超出双精度范围", z=z, alpha=alpha)
    return _series(alpha, z, growth)


def _series(alpha: float, z: float, growth: float) -> float:
    digits = 30 + int(growth / math.log(10.0)) + 1
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        a = mpmath.mpf(alpha)
        abs_z = abs(zz)
        tol = mpmath.mpf(ML_REMAINDER)

        def term(k):
            return zz ** k * mpmath.rgamma(a * k + 1)

        def ratio(k):
            # |t_{k+1}/t_k|
            return abs_z * mpmath.exp(mpmath.loggamma(a * k + 1) - mpmath.loggamma(a * k + a + 1))

        total = mpmath.mpf(0)
        for k in range(ML_MAX_TERMS):
            total += term(k)
            next_ratio = ratio(k + 1)
            if next_ratio < 1:
                tail = abs(term(k + 1)) / (1 - next_ratio)
                if tail <= tol:
                    return float(total)
    raise UnsupportedRangeError("级数在最大项数内未收敛", z=z, alpha=alpha)


def _negative_asymptotic(alpha: float, x: float) -> float:
    """E_α(−x) ~ −Σ_{k≥1} (−x)^{−k}/Γ(1−αk)，0 < α < 1

    负实轴上没有指数项。第 k 项的模不超过 Γ(αk)/(π x^k)，
    该包络在 αk ≈ x^{1/α} 前单调递减，降到 ML_REMAINDER 以下时停止。
    """
    with mpmath.workdps(ML_ASYMPTOTIC_DPS):
        xx = mpmath.mpf(x)
        a = mpmath.mpf(alpha)
        tol = mpmath.mpf(ML_REMAINDER)
        log_x = mpmath.log(xx)
        total = mpmath.mpf(0)
        previous = mpmath.inf
        for k in range(1, ML_MAX_TERMS):
            envelope = mpmath.exp(mpmath.loggamma(a * k) - k * log_x) / mpmath.pi
            if envelope > previous:
                break
            total -= (-xx) ** (-k) * mpmath.rgamma(1 - a * k)
            if envelope <= tol:
                return float(total)
            previous = envelope
    raise UnsupportedRangeError("渐近展开无法达到要求精度", z=-x, alpha=alpha)


def mittag_leffler_array(order: FractionalOrder, z_values: Iterable[float]) -> np.ndarray:
    """逐点求值"""
    return np.array([mittag_leffler(order, z) for z in z_values], dtype=float)
