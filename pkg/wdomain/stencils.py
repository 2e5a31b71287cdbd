"""周期差分模板，数组形式与稀疏矩阵形式保持同一种排列（行优先，第 0 轴为 x）"""
import numpy as np
import scipy.sparse as sp


def centered_diff(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)


def forward_diff(f: np.ndarray, axis: int) -> np.ndarray:
    """连线上的差值 f(x+e) − f(x)，不除以 h"""
    return np.roll(f, -1, axis=axis) - f


def link_average(g: np.ndarray, axis: int) -> np.ndarray:
    """权函数在连线中点的平均值"""
    return 0.5 * (g + np.roll(g, -1, axis=axis))


def _shift_1d(n: int) -> sp.csr_matrix:
    # (S f)[i] = f[i+1]
    return sp.diags([np.ones(n - 1), np.ones(1)], [1, -(n - 1)], shape=(n, n), format='csr')


def centered_diff_matrices(n: int, h: float):
    """返回 (D1, D2)，作用在长度 n² 的行优先向量上"""
    shift = _shift_1d(n)
    c = (shift - shift.T) / (2.0 * h)
    eye = sp.identity(n, format='csr')
    return sp.kron(c, eye, format='csr'), sp.kron(eye, c, format='csr')


def forward_diff_matrices(n: int):
    """返回 (F1, F2)，F_d f = f(x+e_d) − f(x)"""
    shift = _shift_1d(n)
    eye = sp.identity(n, format='csr')
    f = shift - eye
    return sp.kron(f, eye, format='csr'), sp.kron(eye, f, format='csr')


def checkerboard_modes(n: int) -> np.ndarray:
    """中心差分梯度的核：常数以及 n 为偶数时的三个棋盘模式，按欧氏范数归一化"""
    i = np.arange(n)
    ones = np.ones((n, n))
    modes = [ones]
    if n % 2 == 0:
        sign = (-1.0) ** i
        modes.append(np.repeat(sign[:, None], n, axis=1))
        modes.append(np.repeat(sign[None, :], n, axis=0))
        modes.append(np.outer(sign, sign))
    return np.stack([m / np.sqrt(n * n) for m in modes])
