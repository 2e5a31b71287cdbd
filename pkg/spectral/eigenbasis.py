"""g-Stokes 特征基

g-无散子空间的基由两部分组成：
  * 点流函数 δ_p 的离散旋度除以 g（去掉使旋度退化的棋盘核对应的几个点）；
  * 非常数棋盘模式 (c,0)/g、(0,c)/g，它们同样满足 ∇·(g u)=0。
两部分都与两个常数平移场 g-正交，因此 λ1 > 0。
"""
import hashlib
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from spectral.assembly import GStokesOperators, assemble_gstokes
from utils.exceptions import InputError, NumericalError
from utils.logger_config import get_logger, log_error, log_with_context
from wdomain.grid import VelocityField, WeightedGrid
from wdomain.stencils import centered_diff, centered_diff_matrices, checkerboard_modes

logger = get_logger(__name__)

# 旋度核在这些点上可逆，去掉对应的点流函数后旋度映射为单射
_PINNED_POINTS = ((0, 0), (1, 0), (0, 1), (1, 1))

# 子空间维数超过此值时改用稀疏 shift-invert 求解（n=128 时约 1.6 万维）
DENSE_EIGEN_LIMIT = 6000


@dataclass(frozen=True, eq=False)
class GStokesBasis:
    """前 m 个 g-Stokes 特征对，modes 形状为 (m, 2, n, n)"""

    grid: WeightedGrid
    lambdas: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        lambdas = np.array(self.lambdas, dtype=float)
        modes = np.array(self.modes, dtype=float)
        if modes.shape != (lambdas.size, 2, self.grid.n, self.grid.n):
            raise InputError("特征模式形状与网格不符", shape=modes.shape)
        lambdas.setflags(write=False)
        modes.setflags(write=False)
        object.__setattr__(self, 'lambdas', lambdas)
        object.__setattr__(self, 'modes', modes)

    @property
    def m(self) -> int:
        return self.lambdas.size

    @property
    def lambda1(self) -> float:
        return float(self.lambdas[0])

    def mode(self, k: int) -> VelocityField:
        """第 k 个模式（从 0 计数）"""
        return VelocityField(self.modes[k, 0], self.modes[k, 1])

    def fields(self) -> List[VelocityField]:
        return [self.mode(k) for k in range(self.m)]

    def as_matrix(self) -> np.ndarray:
        """(m, 2n²) 的模式矩阵，每行是一个速度向量"""
        return self.modes.reshape(self.m, -1)

    def coefficients(self, field: VelocityField) -> np.ndarray:
        """(field, φ_k)_g，k = 0..m−1"""
        self.grid.check_field(field)
        weighted = field.components * self.grid.g
        return self.grid.h ** 2 * self.as_matrix() @ weighted.ravel()

    def synthesize(self, xi: np.ndarray) -> VelocityField:
        """Σ ξ_k φ_k"""
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.m,):
            raise InputError("系数个数与基不符", expected=self.m, got=xi.shape)
        return VelocityField.from_components(np.tensordot(xi, self.modes, axes=1))

    def orthonormality_residual(self) -> float:
        phi = self.as_matrix()
        weights = np.concatenate([self.grid.g.ravel()] * 2) * self.grid.h ** 2
        gram = (phi * weights) @ phi.T
        return float(np.max(np.abs(gram - np.eye(self.m))))

    def divergence_residual(self) -> float:
        g, h = self.grid.g, self.grid.h
        worst = 0.0
        for k in range(self.m):
            div = centered_diff(g * self.modes[k, 0], 0, h) + centered_diff(g * self.modes[k, 1], 1, h)
            worst = max(worst, float(np.max(np.abs(div))))
        return worst

    def fingerprint(self) -> str:
        digest = hashlib.sha256(self.grid.g.tobytes())
        digest.update(self.lambdas.tobytes())
        digest.update(self.modes.tobytes())
        return digest.hexdigest()


def divergence_free_frame(grid: WeightedGrid) -> sp.csc_matrix:
    """g-无散且与平移场 g-正交的子空间的稀疏基 Z，形状 (2n², dim)"""
    n, h = grid.n, grid.h
    size = n * n
    kernel = checkerboard_modes(n)
    pinned = {i * n + j for i, j in _PINNED_POINTS[:len(kernel)]}
    keep = np.array([p for p in range(size) if p not in pinned])

    D1, D2 = centered_diff_matrices(n, h)
    curl = sp.vstack([-D2, D1], format='csc')[:, keep]
    inv_g = 1.0 / np.concatenate([grid.g.ravel()] * 2)

    harmonic = []
    zero = np.zeros(size)
    for c in kernel[1:]:
        flat = c.ravel() * np.sqrt(size)
        harmonic.append(np.concatenate([flat, zero]))
        harmonic.append(np.concatenate([zero, flat]))

    frame = sp.diags(inv_g) @ curl
    if harmonic:
        frame = sp.hstack([frame, sp.csc_matrix(np.column_stack(harmonic) * inv_g[:, None])])
    return sp.csc_matrix(frame)


def subspace_dimension(grid: WeightedGrid) -> int:
    k = len(checkerboard_modes(grid.n))
    return grid.n * grid.n + k - 2


def _normalize_signs(phi: np.ndarray) -> np.ndarray:
    for k in range(phi.shape[0]):
        idx = int(np.argmax(np.abs(phi[k])))
        if phi[k, idx] < 0:
            phi[k] = -phi[k]
    return phi


def _lowest_eigenvectors(A: sp.spmatrix, B: sp.spmatrix, m: int, dim: int, n: int) -> np.ndarray:
    """A y = λ B y 的前 m 个特征向量，列顺序不保证升序（随后的 Rayleigh-Ritz 会重新排序）"""
    try:
        if dim <= DENSE_EIGEN_LIMIT or m >= dim - 1:
            _, Y = la.eigh(A.toarray(), B.toarray(), subset_by_index=[0, m - 1])
            return Y
        log_with_context(logger, 'info', "子空间维数较大，使用稀疏 shift-invert 求解", n=n, m=m, dimension=dim)
        # A 在子空间上正定，以 0 为位移即取最小的 m 个特征值
        _, Y = spla.eigsh(A.tocsc(), k=m, M=B.tocsc(), sigma=0.0, which='LM')
        return Y
    except (la.LinAlgError, spla.ArpackError, spla.ArpackNoConvergence, RuntimeError) as e:
        raise NumericalError(f"广义特征问题求解失败: {e}", n=n, m=m) from e


@log_error
def eigenbasis(grid: WeightedGrid, m: int, operators: Optional[GStokesOperators] = None) -> GStokesBasis:
    """前 m 个 g-Stokes 特征对

    在 g-无散子空间的基 Z 上求解广义特征问题 ZᵀKgZ y = λ ZᵀMgZ y（维数较大时用稀疏求解），
    再对所得模式做 g-正交化和一次 Rayleigh-Ritz 校正。

    Args:
        grid: 加权网格
        m: 模式个数
        operators: 已装配的算子，缺省时重新装配

    Returns:
        GStokesBasis
    """
    dim = subspace_dimension(grid)
    if int(m) != m or not 1 <= m <= dim:
        raise InputError(f"模式个数超出子空间维数: m={m}", m=m, dimension=dim)
    m = int(m)
    ops = operators or assemble_gstokes(grid)

    Z = divergence_free_frame(grid)
    A = Z.T @ ops.Kg @ Z
    B = Z.T @ ops.Mg @ Z
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    Y = _lowest_eigenvectors(A, B, m, dim, grid.n)

    phi = np.asarray((Z @ Y).T)
    gram = (phi * ops.mass_diag) @ phi.T
    try:
        chol = la.cholesky(0.5 * (gram + gram.T), lower=True)
    except la.LinAlgError as e:
        raise NumericalError(f"特征向量的 Gram 矩阵不正定: {e}", n=grid.n, m=m) from e
    phi = la.solve_triangular(chol, phi, lower=True)

    ritz = phi @ (ops.Kg @ phi.T)
    lambdas, rotation = la.eigh(0.5 * (ritz + ritz.T))
    phi = _normalize_signs(rotation.T @ phi)

    if not lambdas[0] > 0:
        raise NumericalError("最小特征值非正，平移场未被排除", residual=float(lambdas[0]))

    basis = GStokesBasis(grid=grid, lambdas=lambdas, modes=phi.reshape(m, 2, grid.n, grid.n))
    log_with_context(
        logger, 'info', "g-Stokes 特征基计算完成",
        n=grid.n, m=m, dimension=dim, lambda1=f"{lambdas[0]:.10g}", lambda_m=f"{lambdas[-1]:.10g}",
    )
    return basis
