"""加权内积、加权散度、加权 Leray 投影与 H(g) 检验"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from utils.exceptions import InputError, NumericalError
from utils.logger_config import get_logger, log_with_context
from wdomain.grid import ScalarField, VelocityField, WeightedGrid
from wdomain.stencils import centered_diff, checkerboard_modes, forward_diff, link_average

logger = get_logger(__name__)

# 加权 Poisson 方程的相对残差要求
POISSON_RTOL = 1e-12


def _check_pair(u: VelocityField, v: VelocityField, grid: WeightedGrid) -> None:
    grid.check_field(u)
    grid.check_field(v)


def weighted_inner(u: VelocityField, v: VelocityField, grid: WeightedGrid) -> float:
    """离散 (u, v)_g = h² Σ (u·v) g"""
    _check_pair(u, v, grid)
    return float(grid.h ** 2 * np.sum((u.u1 * v.u1 + u.u2 * v.u2) * grid.g))


def weighted_h1_inner(u: VelocityField, v: VelocityField, grid: WeightedGrid) -> float:
    """离散 ((u, v))_g

    梯度取连线上的差商（以连线中点为中心），g 取连线两端的平均；
    h² 面积元与差商的 1/h² 相消。
    """
    _check_pair(u, v, grid)
    total = 0.0
    for axis in (0, 1):
        weight = link_average(grid.g, axis)
        for a, b in ((u.u1, v.u1), (u.u2, v.u2)):
            total += np.sum(weight * forward_diff(a, axis) * forward_diff(b, axis))
    return float(total)


def div_g(u: VelocityField, grid: WeightedGrid) -> ScalarField:
    """∇·(g u) 的中心差分"""
    grid.check_field(u)
    return ScalarField(
        centered_diff(grid.g * u.u1, 0, grid.h) + centered_diff(grid.g * u.u2, 1, grid.h)
    )


def gradient(p: ScalarField, grid: WeightedGrid) -> VelocityField:
    """标量场的中心差分梯度"""
    grid.check_field(p)
    return VelocityField(centered_diff(p.values, 0, grid.h), centered_diff(p.values, 1, grid.h))


class _WeightedPoisson:
    """−∇·(g∇·) 的无矩阵算子及其 Jacobi 预条件"""

    def __init__(self, grid: WeightedGrid):
        self.grid = grid
        n, h, g = grid.n, grid.h, grid.g
        self.n = n
        self.kernel = checkerboard_modes(n).reshape(-1, n * n)
        diag = np.zeros((n, n))
        for axis in (0, 1):
            diag += np.roll(g, -1, axis=axis) + np.roll(g, 1, axis=axis)
        self.inv_diag = (4.0 * h * h / diag).ravel()

    def apply(self, p_flat: np.ndarray) -> np.ndarray:
        n, h, g = self.n, self.grid.h, self.grid.g
        p = p_flat.reshape(n, n)
        out = -(centered_diff(g * centered_diff(p, 0, h), 0, h) + centered_diff(g * centered_diff(p, 1, h), 1, h))
        return out.ravel()

    def deflate(self, x: np.ndarray) -> np.ndarray:
        return x - self.kernel.T @ (self.kernel @ x)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        size = self.n * self.n
        b = self.deflate(rhs)
        b_norm = float(np.linalg.norm(b))
        if b_norm == 0.0:
            return np.zeros(size)
        op = LinearOperator((size, size), matvec=self.apply, dtype=float)
        precond = LinearOperator((size, size), matvec=lambda x: self.deflate(self.inv_diag * self.deflate(x)), dtype=float)
        # 先按更严的目标迭代，停滞时再以 POISSON_RTOL 检查真实残差
        p, info = cg(op, b, rtol=1e-14, atol=0.0, maxiter=20 * size, M=precond)
        p = self.deflate(p)
        residual = float(np.linalg.norm(self.apply(p) - b)) / b_norm
        if residual > POISSON_RTOL:
            log_with_context(logger, 'error', "加权 Poisson 方程未收敛", info=info, residual=residual, n=self.n)
            raise NumericalError("加权 Poisson 方程的 CG 迭代未收敛", residual=residual, info=info)
        return p


def leray_project_g(u: VelocityField, grid: WeightedGrid) -> VelocityField:
    """(·,·)_g 意义下到 g-无散场的正交投影

    求解 ∇·(g∇p) = ∇·(g u)，返回 u − ∇p。

    Args:
        u: 输入速度场
        grid: 加权网格

    Returns:
        g-无散的速度场
    """
    grid.check_field(u)
    solver = _WeightedPoisson(grid)
    rhs = -div_g(u, grid).values.ravel()
    p = ScalarField(solver.solve(rhs).reshape(grid.n, grid.n))
    return u - gradient(p, grid)


@dataclass(frozen=True)
class HgVerdict:
    """H(g) 检验结果"""

    holds: bool
    margin: float
    nu_prime_factor: float
    factor_first: float
    factor_second: float
    lambda1: float
    grad_g_sup: float
    m0: float

    def as_dict(self):
        return {
            'holds': self.holds,
            'lambda1': self.lambda1,
            'margin': self.margin,
            'nu_prime_factor': self.nu_prime_factor,
            'nu_prime_factor_first': self.factor_first,
            'nu_prime_factor_second': self.factor_second,
            'grad_g_sup': self.grad_g_sup,
            'm0': self.m0,
        }


def check_Hg(grid: WeightedGrid, lambda1: float) -> HgVerdict:
    """检验 |∇g|_∞ < ½·m0·√λ1

    ν′ 的两种写法取较小者作为保守因子。

    Args:
        grid: 加权网格
        lambda1: 最小 g-Stokes 特征值

    Returns:
        HgVerdict
    """
    if not lambda1 > 0:
        raise InputError(f"λ1 必须为正: {lambda1}", lambda1=lambda1)
    root = float(np.sqrt(lambda1))
    threshold = 0.5 * grid.m0 * root
    factor_first = 1.0 - 2.0 * grid.grad_g_sup / (grid.m0 * root)
    factor_second = 1.0 - 2.0 * grid.grad_g_sup ** 2 / (lambda1 * grid.m0 ** 2)
    verdict = HgVerdict(
        holds=bool(grid.grad_g_sup < threshold),
        margin=float(threshold - grid.grad_g_sup),
        nu_prime_factor=float(min(factor_first, factor_second)),
        factor_first=float(factor_first),
        factor_second=float(factor_second),
        lambda1=float(lambda1),
        grad_g_sup=grid.grad_g_sup,
        m0=grid.m0,
    )
    log_with_context(logger, 'info', "H(g) 检验完成", holds=verdict.holds, margin=f"{verdict.margin:.6g}")
    return verdict
