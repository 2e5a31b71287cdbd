"""经典 α=1 情形的隐式 Euler 参照积分器（Newton 迭代）"""
import numpy as np

from fracops.grid import TimeGrid
from spectral.galerkin import GalerkinSystem
from utils.exceptions import InputError, NumericalError


def implicit_euler_reference(system: GalerkinSystem, time: TimeGrid, xi0: np.ndarray, eta: np.ndarray,
                             tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """(ξⁿ − ξ^{n−1})/dt + ν(Λ+Cmat)ξⁿ + N(ξⁿ) = ηⁿ，每步用 Newton 法求解

    Args:
        system: Galerkin 系统
        time: 时间网格
        xi0: 初始系数
        eta: 形状 (n_steps+1, m) 的强迫系数
        tol: Newton 增量的收敛阈值
        max_iter: 每步最多迭代次数

    Returns:
        形状 (n_steps+1, m) 的系数历史
    """
    m = system.m
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (time.n_steps + 1, m) or np.shape(xi0) != (m,):
        raise InputError("参照积分器的输入尺寸不符", m=m, eta=eta.shape)
    dt = time.dt
    linear = np.eye(m) / dt + system.linear_matrix()
    xi = np.empty((time.n_steps + 1, m))
    xi[0] = xi0
    for n in range(1, time.n_steps + 1):
        guess = xi[n - 1].copy()
        for _ in range(max_iter):
            F = linear @ guess + system.nonlinear(guess) - xi[n - 1] / dt - eta[n]
            J = linear + system.nonlinear_jacobian(guess)
            delta = np.linalg.solve(J, F)
            guess -= delta
            if np.linalg.norm(delta) < tol:
                break
        else:
            raise NumericalError("Newton 迭代未收敛", residual=float(np.linalg.norm(F)), step_index=n)
        xi[n] = guess
    return xi
