"""g-Stokes 算子的矩阵装配"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from wdomain.grid import WeightedGrid
from wdomain.stencils import centered_diff_matrices, forward_diff_matrices, link_average


@dataclass(frozen=True, eq=False)
class GStokesOperators:
    """加权质量阵 Mg、加权刚度阵 Kg 与加权散度 Dg

    速度向量按分量拼接，长度 2n²；Dg 把速度映射到 n² 个散度值。
    """

    Mg: sp.csr_matrix
    Kg: sp.csr_matrix
    Dg: sp.csr_matrix
    mass_diag: np.ndarray


def assemble_gstokes(grid: WeightedGrid) -> GStokesOperators:
    """装配与 wdomain 中内积、散度一致的稀疏矩阵

    Args:
        grid: 加权网格

    Returns:
        GStokesOperators
    """
    n, h = grid.n, grid.h
    g = grid.g.ravel()

    mass_diag = np.concatenate([g, g]) * h * h
    mass_diag.setflags(write=False)
    Mg = sp.diags(mass_diag, format='csr')

    F1, F2 = forward_diff_matrices(n)
    w1 = sp.diags(link_average(grid.g, 0).ravel())
    w2 = sp.diags(link_average(grid.g, 1).ravel())
    K1 = (F1.T @ w1 @ F1 + F2.T @ w2 @ F2).tocsr()
    Kg = sp.block_diag([K1, K1], format='csr')

    D1, D2 = centered_diff_matrices(n, h)
    G = sp.diags(g)
    Dg = sp.hstack([D1 @ G, D2 @ G], format='csr')

    return GStokesOperators(Mg=Mg, Kg=Kg, Dg=Dg, mass_diag=mass_diag)
