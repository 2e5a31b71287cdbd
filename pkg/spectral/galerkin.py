"""斜对称三线性形式 b̃_g 以及 Galerkin 系统的矩阵和张量"""
import hashlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from spectral.eigenbasis import GStokesBasis
from utils.exceptions import InputError, ResourceError
from utils.logger_config import get_logger, log_error, log_with_context
from wdomain.grid import VelocityField, WeightedGrid
from wdomain.stencils import centered_diff

logger = get_logger(__name__)

# 对流张量 m³ 个元素的上限
MAX_TENSOR_MODES = 64


def _gradients(components: np.ndarray, h: float) -> np.ndarray:
    """d[..., j, k, :, :] = ∂_j v_k，输入形状 (..., 2, n, n)"""
    return np.stack(
        [np.stack([centered_diff(components[..., k, :, :], -2 + j, h) for k in range(2)], axis=-3) for j in range(2)],
        axis=-4,
    )


def _q_form(u: np.ndarray, v: np.ndarray, w: np.ndarray, grid: WeightedGrid) -> float:
    # q(u,v,w) = h² Σ g Σ_{j,k} u_j ∂_j v_k w_k
    dv = _gradients(v, grid.h)
    transport = np.einsum('jxy,jkxy->kxy', u, dv)
    return float(grid.h ** 2 * np.sum(grid.g * transport * w))


def trilinear_bg(u: VelocityField, v: VelocityField, w: VelocityField, grid: WeightedGrid) -> float:
    """b̃_g(u,v,w) = ½[q(u,v,w) − q(u,w,v)]

    对所有 u 都有 b̃_g(u,v,v) = 0，不要求 u 无散。
    """
    for field in (u, v, w):
        grid.check_field(field)
    uc, vc, wc = u.components, v.components, w.components
    return 0.5 * (_q_form(uc, vc, wc, grid) - _q_form(uc, wc, vc, grid))


def cg_matrix(basis: GStokesBasis) -> np.ndarray:
    """Cmat[k,l] = b̃_g(∇g/g, φ_l, φ_k)，g 为常数时恰为零矩阵"""
    grid = basis.grid
    drift = grid.grad_g_over_g
    d_phi = _gradients(basis.modes, grid.h)
    transport = np.einsum('jxy,ljkxy->lkxy', drift, d_phi)
    weighted = (basis.modes * grid.g).reshape(basis.m, -1)
    # Q[l,k] = q(∇g/g, φ_l, φ_k)
    Q = grid.h ** 2 * transport.reshape(basis.m, -1) @ weighted.T
    return 0.5 * (Q.T - Q)


def convection_tensor(basis: GStokesBasis) -> np.ndarray:
    """T[k,l,l'] = b̃_g(φ_l, φ_l', φ_k)

    Args:
        basis: 特征基

    Returns:
        形状 (m, m, m) 的张量
    """
    m = basis.m
    if m > MAX_TENSOR_MODES:
        raise ResourceError(f"对流张量模式数超过上限 {MAX_TENSOR_MODES}", m=m)
    grid = basis.grid
    d_phi = _gradients(basis.modes, grid.h)
    weighted = (basis.modes * grid.g).reshape(m, -1)
    # Q[l,p,q] = q(φ_l, φ_p, φ_q)
    Q = np.empty((m, m, m))
    for l in range(m):
        transport = np.einsum('jxy,pjkxy->pkxy', basis.modes[l], d_phi)
        Q[l] = grid.h ** 2 * transport.reshape(m, -1) @ weighted.T
    return 0.5 * (Q.transpose(2, 0, 1) - Q.transpose(1, 0, 2))


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """截断系统 ∂^α ξ + ν(Λ + Cmat)ξ + N(ξ) = η 的数据"""

    lambdas: np.ndarray
    Cmat: np.ndarray
    Ttensor: np.ndarray
    nu: float
    basis: Optional[GStokesBasis] = None

    def __post_init__(self):
        lambdas = np.array(self.lambdas, dtype=float)
        m = lambdas.size
        Cmat = np.array(self.Cmat, dtype=float)
        Ttensor = np.array(self.Ttensor, dtype=float)
        if Cmat.shape != (m, m) or Ttensor.shape != (m, m, m):
            raise InputError("Galerkin 系统的矩阵尺寸不一致", m=m, Cmat=Cmat.shape, Ttensor=Ttensor.shape)
        if not self.nu > 0:
            raise InputError(f"粘性系数必须为正: {self.nu}", nu=self.nu)
        for array in (lambdas, Cmat, Ttensor):
            array.setflags(write=False)
        object.__setattr__(self, 'lambdas', lambdas)
        object.__setattr__(self, 'Cmat', Cmat)
        object.__setattr__(self, 'Ttensor', Ttensor)
        object.__setattr__(self, 'nu', float(self.nu))

    @property
    def m(self) -> int:
        return self.lambdas.size

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.lambdas)

    def linear_matrix(self) -> np.ndarray:
        """ν(Λ + Cmat)"""
        return self.nu * (self.Lambda + self.Cmat)

    def nonlinear(self, xi: np.ndarray) -> np.ndarray:
        """N(ξ)_k = Σ_{l,l'} T[k,l,l'] ξ_l ξ_l'"""
        return self.Ttensor.reshape(self.m, -1) @ np.outer(xi, xi).ravel()

    def nonlinear_jacobian(self, xi: np.ndarray) -> np.ndarray:
        return np.einsum('klp,p->kl', self.Ttensor, xi) + np.einsum('klp,l->kp', self.Ttensor, xi)

    def linearized(self) -> 'GalerkinSystem':
        """去掉对流项的线性系统"""
        return replace(self, Ttensor=np.zeros_like(self.Ttensor))

    def with_nu(self, nu: float) -> 'GalerkinSystem':
        return replace(self, nu=nu)

    def energy_norm_sq(self, xi: np.ndarray) -> np.ndarray:
        """‖ξ‖²_V = Σ λ_k ξ_k²，支持按行批量计算"""
        return np.asarray(xi) ** 2 @ self.lambdas

    def dual_norm_sq(self, eta: np.ndarray) -> np.ndarray:
        """‖η‖²_* = Σ η_k²/λ_k"""
        return np.asarray(eta) ** 2 @ (1.0 / self.lambdas)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for array in (self.lambdas, self.Cmat, self.Ttensor):
            digest.update(array.tobytes())
        digest.update(np.float64(self.nu).tobytes())
        return digest.hexdigest()


@log_error
def build_galerkin_system(basis: GStokesBasis, nu: float) -> GalerkinSystem:
    """由特征基装配 Galerkin 系统"""
    system = GalerkinSystem(
        lambdas=basis.lambdas,
        Cmat=cg_matrix(basis),
        Ttensor=convection_tensor(basis),
        nu=nu,
        basis=basis,
    )
    log_with_context(logger, 'info', "Galerkin 系统装配完成", m=basis.m, nu=nu)
    return system


@dataclass(frozen=True)
class LadyzhenskayaEstimate:
    """b̃_g 上界常数的经验估计"""

    classical: float
    printed_form: float
    samples: int


def ladyzhenskaya_ratio(system: GalerkinSystem, samples: int = 500, seed: int = 0) -> LadyzhenskayaEstimate:
    """在 span(basis) 中随机取场，估计

    classical:    |b̃(u,v,w)| / (|u|^½‖u‖^½ ‖v‖ |w|^½‖w‖^½)
    printed_form: |b̃(u,v,w)| / (|u|^½‖u‖^½ |v|^½ |w|^½‖w‖^½)
    的最大值。
    """
    rng = np.random.default_rng(seed)
    lambdas = system.lambdas
    # 按 λ^{-1/2} 衰减，样本更接近光滑场
    decay = 1.0 / np.sqrt(lambdas)
    classical = 0.0
    printed = 0.0
    for _ in range(samples):
        cu, cv, cw = (rng.standard_normal(system.m) * decay for _ in range(3))
        value = abs(float(np.einsum('klp,l,p,k->', system.Ttensor, cu, cv, cw)))
        abs_u, abs_v, abs_w = (float(np.linalg.norm(c)) for c in (cu, cv, cw))
        nrm_u, nrm_v, nrm_w = (float(np.sqrt(system.energy_norm_sq(c))) for c in (cu, cv, cw))
        common = np.sqrt(abs_u * nrm_u) * np.sqrt(abs_w * nrm_w)
        classical = max(classical, value / (common * nrm_v))
        printed = max(printed, value / (common * np.sqrt(abs_v)))
    return LadyzhenskayaEstimate(classical=classical, printed_form=printed, samples=samples)
