"""Galerkin 分数阶 ODE 系统的 L1/Picard 时间推进"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from fracops.caputo import l1_weights
from fracops.grid import SampledFunction, TimeGrid
from solver.config import SolverConfig
from solver.trajectory import Trajectory
from spectral.eigenbasis import GStokesBasis
from spectral.galerkin import GalerkinSystem
from utils.exceptions import InputError, StepError
from utils.logger_config import get_logger, log_error, log_with_context
from wdomain.grid import VelocityField

logger = get_logger(__name__)

ForcingSource = Union[VelocityField, Callable[[float], VelocityField]]


def project_initial(u0: VelocityField, basis: GStokesBasis) -> np.ndarray:
    """ξ⁰_k = (u0, φ_k)_g"""
    return basis.coefficients(u0)


def forcing_coeffs(f: ForcingSource, basis: GStokesBasis, time: TimeGrid) -> np.ndarray:
    """在每个时间网格点上计算 η_k(t_j) = (f(t_j), φ_k)_g

    Args:
        f: 与时间无关的速度场，或 t -> VelocityField 的可调用对象
        basis: 特征基
        time: 时间网格

    Returns:
        形状 (n_steps+1, m) 的系数数组
    """
    if isinstance(f, VelocityField):
        eta = basis.coefficients(f)
        return np.tile(eta, (time.n_steps + 1, 1))
    eta = np.empty((time.n_steps + 1, basis.m))
    for n, t in enumerate(time.times):
        try:
            field = f(float(t))
        except Exception as e:
            raise InputError(f"强迫项在 t={t:.6g} 处求值失败: {e}", step_index=n) from e
        eta[n] = basis.coefficients(field)
    return eta


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int
    residual: float
    increment: float


class L1Stepper:
    """预先计算 L1 权重并对 (a·b0·I + ν(Λ+Cmat)) 做一次 LU 分解

    同一次求解内每一步共用这些量。
    """

    def __init__(self, system: GalerkinSystem, cfg: SolverConfig):
        self.system = system
        self.cfg = cfg
        self.weights = l1_weights(cfg.order, cfg.n_steps)
        self.scale = cfg.dt ** (-cfg.alpha) / cfg.order.gamma_2_minus_alpha
        self.linear = system.linear_matrix()
        lhs = self.scale * self.weights[0] * np.eye(system.m) + self.linear
        self.factor = lu_factor(lhs)

    def memory(self, history: np.ndarray) -> np.ndarray:
        """H = b0·ξ^{n−1} − Σ_{j=1}^{n−1} b_j (ξ^{n−j} − ξ^{n−j−1})"""
        n = history.shape[0]
        known = self.weights[0] * history[n - 1]
        if n > 1:
            diffs = history[1:] - history[:-1]
            known = known - np.tensordot(self.weights[1:n], diffs[::-1], axes=1)
        return known

    def residual(self, xi: np.ndarray, memory: np.ndarray, eta_n: np.ndarray) -> float:
        value = (self.scale * (self.weights[0] * xi - memory) + self.linear @ xi
                 + self.system.nonlinear(xi) - eta_n)
        return float(np.linalg.norm(value))

    def advance(self, history: np.ndarray, eta_n: np.ndarray) -> Tuple[np.ndarray, StepDiagnostics]:
        n = history.shape[0]
        memory = self.memory(history)
        rhs_known = eta_n + self.scale * memory
        xi = history[n - 1].copy()
        increment = np.inf
        for iteration in range(1, self.cfg.picard_max + 1):
            xi_new = lu_solve(self.factor, rhs_known - self.system.nonlinear(xi))
            increment = float(np.linalg.norm(xi_new - xi))
            xi = xi_new
            if not np.all(np.isfinite(xi)):
                raise StepError("Picard 迭代发散", step_index=n, residual=float('inf'))
            if increment < self.cfg.picard_tol:
                residual = self.residual(xi, memory, eta_n)
                return xi, StepDiagnostics(iteration, residual, increment)
        residual = self.residual(xi, memory, eta_n)
        raise StepError(
            f"Picard 迭代在 {self.cfg.picard_max} 次内未收敛",
            step_index=n, residual=residual, increment=increment,
        )


def step(system: GalerkinSystem, cfg: SolverConfig, history: np.ndarray, eta_n: np.ndarray,
         *, stepper: Optional[L1Stepper] = None) -> Tuple[np.ndarray, StepDiagnostics]:
    """推进一步，history 为 ξ⁰..ξ^{n−1}，返回 ξⁿ 及诊断

    Args:
        system: Galerkin 系统
        cfg: 求解参数
        history: 形状 (n, m) 的已知系数
        eta_n: t_n 处的强迫系数
        stepper: 可复用的 L1Stepper，缺省时临时构造

    Returns:
        (ξⁿ, StepDiagnostics)
    """
    history = np.atleast_2d(np.asarray(history, dtype=float))
    n = history.shape[0]
    if history.shape[1] != system.m or np.shape(eta_n) != (system.m,):
        raise InputError("历史或强迫系数的维数与系统不符", m=system.m, history=history.shape)
    if n > cfg.n_steps:
        raise InputError("步号超出时间网格", n=n, n_steps=cfg.n_steps)
    if stepper is None:
        stepper = L1Stepper(system, cfg)
    return stepper.advance(history, np.asarray(eta_n, dtype=float))


def _eta_array(eta, cfg: SolverConfig, m: int) -> np.ndarray:
    if isinstance(eta, SampledFunction):
        if eta.grid != cfg.time:
            raise InputError("强迫采样的时间网格与求解参数不一致")
        eta = eta.values
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (cfg.n_steps + 1, m):
        raise InputError("强迫系数的形状不符", expected=(cfg.n_steps + 1, m), got=eta.shape)
    return eta


@log_error
def solve_ivp(system: GalerkinSystem, cfg: SolverConfig, xi0: np.ndarray,
              eta: Union[np.ndarray, SampledFunction]) -> Trajectory:
    """对 n = 1..n_steps 依次调用 step，返回完整轨迹

    相同输入得到逐位相同的轨迹。
    """
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (system.m,):
        raise InputError("初始系数的维数与系统不符", expected=system.m, got=xi0.shape)
    eta = _eta_array(eta, cfg, system.m)
    n_steps = cfg.n_steps
    xi = np.empty((n_steps + 1, system.m))
    xi[0] = xi0
    iterations = np.zeros(n_steps + 1, dtype=int)
    residual = np.zeros(n_steps + 1)
    stepper = L1Stepper(system, cfg)
    for n in range(1, n_steps + 1):
        xi[n], diagnostics = stepper.advance(xi[:n], eta[n])
        iterations[n] = diagnostics.iterations
        residual[n] = diagnostics.residual
    log_with_context(
        logger, 'info', "时间推进完成",
        n_steps=n_steps, m=system.m, alpha=cfg.alpha,
        max_picard=int(iterations.max()), max_residual=f"{residual.max():.3e}",
    )
    return Trajectory(
        time=cfg.time,
        xi=xi,
        eta=eta,
        lambdas=system.lambdas,
        picard_iters=iterations,
        residual=residual,
        system_fingerprint=system.fingerprint(),
    )


def reconstruct(traj: Trajectory, basis: GStokesBasis, n: int) -> VelocityField:
    """u^{(m)}(t_n) = Σ_k ξⁿ_k φ_k"""
    if not 0 <= n <= traj.time.n_steps:
        raise InputError("步号越界", n=n, n_steps=traj.time.n_steps)
    if traj.m != basis.m:
        raise InputError("轨迹与特征基的模式数不一致", traj=traj.m, basis=basis.m)
    return basis.synthesize(traj.xi[n])
