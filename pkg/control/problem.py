"""最优控制问题：控制到状态的映射、跟踪目标与目标泛函"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from fracops.grid import TimeGrid
from solver.config import SolverConfig
from solver.integrator import solve_ivp
from solver.trajectory import Trajectory
from spectral.eigenbasis import GStokesBasis
from spectral.galerkin import GalerkinSystem
from utils.exceptions import InputError
from wdomain.grid import VelocityField
from wdomain.operators import div_g, weighted_inner

# 执行器场 g-散度的容许值（相对场的最大模）
ACTUATOR_DIVERGENCE_TOL = 1e-9


def _readonly(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TrackingTarget:
    """跟踪目标 z(t_n) 在特征基上的分解

    z = Σ ζ_k φ_k + z⊥，perp 记录 |z⊥|²_g，使 |u − z|²_g = |ξ − ζ|² + |z⊥|²_g。
    """

    zeta: np.ndarray
    perp: np.ndarray

    def __post_init__(self):
        zeta = _readonly(self.zeta)
        perp = _readonly(self.perp)
        if zeta.ndim != 2 or perp.shape != (zeta.shape[0],):
            raise InputError("跟踪目标的尺寸不一致", zeta=zeta.shape, perp=perp.shape)
        object.__setattr__(self, 'zeta', zeta)
        object.__setattr__(self, 'perp', perp)

    @classmethod
    def zero(cls, time: TimeGrid, m: int) -> 'TrackingTarget':
        return cls(np.zeros((time.n_steps + 1, m)), np.zeros(time.n_steps + 1))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> 'TrackingTarget':
        """以某条 Galerkin 轨迹本身为目标，z⊥ = 0"""
        return cls(traj.xi, np.zeros(traj.time.n_steps + 1))

    @classmethod
    def from_fields(cls, z: Union[Sequence[VelocityField], Callable[[float], VelocityField]],
                    basis: GStokesBasis, time: TimeGrid) -> 'TrackingTarget':
        """由每个 t_n 上的速度场构造（序列或 t -> VelocityField）"""
        if callable(z):
            fields = [z(float(t)) for t in time.times]
        else:
            fields = list(z)
        if len(fields) != time.n_steps + 1:
            raise InputError("目标场个数与时间网格不符", expected=time.n_steps + 1, got=len(fields))
        zeta = np.array([basis.coefficients(target) for target in fields])
        perp = np.array([
            max(weighted_inner(target, target, basis.grid) - float(np.sum(c ** 2)), 0.0)
            for target, c in zip(fields, zeta)
        ])
        return cls(zeta, perp)


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """问题 (P) 的数据

    控制 w 形如 (n_steps, d_c)，在时间上分段常数：w[n−1] 作用于 (t_{n−1}, t_n]，
    t_0 处沿用 w[0]。强迫为 f_base + Σ_i w_i·actuator_i。
    """

    basis: GStokesBasis
    system: GalerkinSystem
    cfg: SolverConfig
    xi0: np.ndarray
    eta_base: np.ndarray
    actuators: Tuple[VelocityField, ...]
    z_target: TrackingTarget
    kappa: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    cost_exponent: Optional[float] = None
    actuator_coeffs: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        m, n_rows = self.system.m, self.cfg.n_steps + 1
        actuators = tuple(self.actuators)
        if not actuators:
            raise InputError("至少需要一个执行器")
        for i, actuator in enumerate(actuators):
            self.basis.grid.check_field(actuator)
            scale = max(1.0, float(np.max(np.abs(actuator.components))))
            divergence = float(np.max(np.abs(div_g(actuator, self.basis.grid).values)))
            if divergence > ACTUATOR_DIVERGENCE_TOL * scale:
                raise InputError("执行器场不是 g-无散的", actuator=i, divergence=divergence)
        d_c = len(actuators)
        xi0 = _readonly(self.xi0)
        eta_base = _readonly(self.eta_base)
        if self.basis.m != m or xi0.shape != (m,) or eta_base.shape != (n_rows, m):
            raise InputError("控制问题的维数不一致", m=m, xi0=xi0.shape, eta_base=eta_base.shape)
        if self.z_target.zeta.shape != (n_rows, m):
            raise InputError("跟踪目标与时间网格或基不符", expected=(n_rows, m), got=self.z_target.zeta.shape)
        box_lo = _readonly(np.broadcast_to(self.box_lo, (d_c,)))
        box_hi = _readonly(np.broadcast_to(self.box_hi, (d_c,)))
        if np.any(box_lo > box_hi):
            raise InputError("容许集为空：存在 lo > hi", lo=box_lo.tolist(), hi=box_hi.tolist())
        if not self.kappa > 0:
            raise InputError(f"控制代价权重必须为正: {self.kappa}", kappa=self.kappa)
        exponent = 2.0 / self.cfg.alpha1 if self.cost_exponent is None else float(self.cost_exponent)
        if exponent < 2.0:
            raise InputError(f"控制代价指数不能小于 2: {exponent}", cost_exponent=exponent)

        object.__setattr__(self, 'actuators', actuators)
        object.__setattr__(self, 'xi0', xi0)
        object.__setattr__(self, 'eta_base', eta_base)
        object.__setattr__(self, 'box_lo', box_lo)
        object.__setattr__(self, 'box_hi', box_hi)
        object.__setattr__(self, 'cost_exponent', exponent)
        object.__setattr__(self, 'actuator_coeffs', _readonly([self.basis.coefficients(a) for a in actuators]))

    @property
    def d_c(self) -> int:
        return len(self.actuators)

    @property
    def control_shape(self) -> Tuple[int, int]:
        return self.cfg.n_steps, self.d_c

    @property
    def time(self) -> TimeGrid:
        return self.cfg.time

    def zeros(self) -> np.ndarray:
        return np.zeros(self.control_shape)

    def project(self, w: np.ndarray) -> np.ndarray:
        """逐坐标截断到盒子 U_ad"""
        return np.clip(w, self.box_lo, self.box_hi)

    def check_control(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != self.control_shape:
            raise InputError("控制的形状不符", expected=self.control_shape, got=w.shape)
        if not np.all(np.isfinite(w)):
            raise InputError("控制中含有 NaN 或 Inf")
        outside = (w < self.box_lo) | (w > self.box_hi)
        if np.any(outside):
            cell, comp = np.argwhere(outside)[0]
            raise InputError("控制超出容许集", cell=int(cell), comp=int(comp), value=float(w[cell, comp]))
        return w

    def forcing_eta(self, w: np.ndarray) -> np.ndarray:
        """η = η_base + w(t_n)·B，B 为执行器的模式系数"""
        w = self.check_control(w)
        per_node = np.vstack([w[:1], w])
        return self.eta_base + per_node @ self.actuator_coeffs


def solution_map(w: np.ndarray, prob: ControlProblem) -> Trajectory:
    """S(f_base + C w)：唯一性使其成为单值映射"""
    return solve_ivp(prob.system, prob.cfg, prob.xi0, prob.forcing_eta(w))


def tracking_term(traj: Trajectory, prob: ControlProblem) -> float:
    """½∫|u^{(m)} − z|²_g dt，时间上用梯形公式"""
    if traj.xi.shape != prob.z_target.zeta.shape:
        raise InputError("轨迹与跟踪目标的尺寸不一致", traj=traj.xi.shape, target=prob.z_target.zeta.shape)
    mismatch = np.sum((traj.xi - prob.z_target.zeta) ** 2, axis=1) + prob.z_target.perp
    return 0.5 * float(trapezoid(mismatch, dx=traj.time.dt))


def control_cost(w: np.ndarray, prob: ControlProblem) -> float:
    """Σ_cells dt·κ‖w‖^p"""
    w = np.asarray(w, dtype=float)
    if w.shape != prob.control_shape:
        raise InputError("控制的形状不符", expected=prob.control_shape, got=w.shape)
    norms = np.linalg.norm(w, axis=1)
    return float(prob.cfg.dt * prob.kappa * np.sum(norms ** prob.cost_exponent))


def control_cost_gradient(w: np.ndarray, prob: ControlProblem) -> np.ndarray:
    """dt·p·κ‖w‖^{p−2}·w"""
    w = np.asarray(w, dtype=float)
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    p = prob.cost_exponent
    factor = norms ** (p - 2.0)
    return prob.cfg.dt * p * prob.kappa * factor * w


def objective(traj: Trajectory, w: np.ndarray, prob: ControlProblem) -> float:
    """J(u, w) = 跟踪项 + 控制代价"""
    return tracking_term(traj, prob) + control_cost(w, prob)


def evaluate(w: np.ndarray, prob: ControlProblem) -> Tuple[float, Trajectory]:
    traj = solution_map(w, prob)
    return objective(traj, w, prob), traj
