"""先验能量估计与唯一性稳定界的逐步核验"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.special import gamma

from fracops.grid import FractionalOrder, SampledFunction
from fracops.integrals import rl_integral_left
from solver.config import SolverConfig
from solver.trajectory import Trajectory
from utils.exceptions import HypothesisError, InputError
from utils.logger_config import get_logger, log_error, log_with_context
from wdomain.grid import WeightedGrid
from wdomain.operators import check_Hg

logger = get_logger(__name__)

CERTIFICATE_KINDS = ('sup', 'integral', 'l2')


def _rl_integral_series(alpha: float, values: np.ndarray, traj: Trajectory) -> np.ndarray:
    order = FractionalOrder(alpha)
    sampled = SampledFunction(traj.time, values)
    return np.array([rl_integral_left(order, sampled, n) for n in range(traj.time.n_steps + 1)])


def _source_integral(traj: Trajectory, alpha1: float) -> np.ndarray:
    """F_n = ∫₀^{t_n} ‖η‖_*^{2/α₁} ds（梯形公式）"""
    dual_sq = traj.eta ** 2 @ (1.0 / traj.lambdas)
    return cumulative_trapezoid(dual_sq ** (1.0 / alpha1), dx=traj.time.dt, initial=0.0)


@dataclass(frozen=True, eq=False)
class EnergyCertificate:
    """三种能量界的逐步左右两端

    sup:      |ξⁿ|² ≤ slack·(|ξ⁰|² + F_n/ν′ + T^{1+b}/((1+b)ν′))
    integral: I^α[‖ξ‖²_V](t_n) ≤ slack·(|ξ⁰|²/ν′ + F_n/ν′² + T^{1+b}/((1+b)ν′²))
    l2:       T^{α−1}∫₀^{t_n}‖ξ‖²_V ≤ Γ(α)·(integral 的右端)
    """

    times: np.ndarray
    bounds: dict
    nu_prime: float
    lambda1: float
    slack: float
    alpha1: float
    b: float
    trajectory_hash: str

    def lhs(self, kind: str = 'sup') -> np.ndarray:
        return self.bounds[kind][0]

    def rhs(self, kind: str = 'sup') -> np.ndarray:
        return self.bounds[kind][1]

    def margins(self, kind: str = 'sup') -> np.ndarray:
        return self.rhs(kind) - self.lhs(kind)

    def passes(self, kind: str = 'sup') -> np.ndarray:
        return self.lhs(kind) <= self.rhs(kind)

    @property
    def passed(self) -> bool:
        return all(bool(np.all(self.passes(kind))) for kind in CERTIFICATE_KINDS)

    def first_failure(self, kind: str = 'sup'):
        """第一个违反界的步号，全部通过时返回 None"""
        failing = np.flatnonzero(~self.passes(kind))
        return int(failing[0]) if failing.size else None

    def to_frame(self, kind: str = 'sup') -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'bound_lhs': self.lhs(kind),
            'bound_rhs': self.rhs(kind),
            'margin': self.margins(kind),
            'pass': self.passes(kind),
        })


@log_error
def energy_certificate(traj: Trajectory, grid: WeightedGrid, lambda1: float, cfg: SolverConfig) -> EnergyCertificate:
    """在每个 t_n 上核验先验能量估计

    H(g) 不成立时拒绝给出证书，而不是判定轨迹失败。

    Args:
        traj: solve_ivp 给出的轨迹（或人工构造的系数序列）
        grid: 加权网格
        lambda1: 最小特征值
        cfg: 求解参数，提供 α、α₁、ν 和 slack

    Returns:
        EnergyCertificate
    """
    if traj.time != cfg.time:
        raise InputError("轨迹的时间网格与求解参数不一致")
    verdict = check_Hg(grid, lambda1)
    if not verdict.holds:
        raise HypothesisError("H(g) 不成立，无法给出能量证书", margin=verdict.margin, lambda1=lambda1)
    nu_prime = cfg.nu * verdict.nu_prime_factor
    slack = cfg.certificate_slack
    b = cfg.b
    T = traj.time.T
    source = _source_integral(traj, cfg.alpha1)
    time_term = T ** (1.0 + b) / (1.0 + b)

    energy = traj.energy
    enstrophy = traj.enstrophy
    sup_rhs = slack * (energy[0] + source / nu_prime + time_term / nu_prime)
    integral_lhs = _rl_integral_series(cfg.alpha, enstrophy, traj)
    integral_rhs = slack * (energy[0] / nu_prime + source / nu_prime ** 2 + time_term / nu_prime ** 2)
    l2_lhs = T ** (cfg.alpha - 1.0) * cumulative_trapezoid(enstrophy, dx=traj.time.dt, initial=0.0)
    l2_rhs = gamma(cfg.alpha) * integral_rhs

    certificate = EnergyCertificate(
        times=traj.times,
        bounds={
            'sup': (energy, sup_rhs),
            'integral': (integral_lhs, integral_rhs),
            'l2': (l2_lhs, l2_rhs),
        },
        nu_prime=nu_prime,
        lambda1=float(lambda1),
        slack=slack,
        alpha1=cfg.alpha1,
        b=b,
        trajectory_hash=traj.input_hash,
    )
    log_with_context(
        logger, 'info', "能量证书核验完成",
        passed=certificate.passed, nu_prime=f"{nu_prime:.6g}",
        min_margin=f"{certificate.margins('sup').min():.6g}",
    )
    return certificate


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """|wⁿ|² ≤ slack·|w⁰|²·exp(c₂·I^α[‖ξ₂‖²_V](t_n)) 的逐步核验

    c₂ = ĉ²/ν 由经验 Ladyzhenskaya 常数 ĉ 得到，不是证明中的常数。
    apriori_factor 是仅用先验估计代替 ‖ξ₂‖²_V 积分时的放大因子。
    """

    times: np.ndarray
    gap: np.ndarray
    bound: np.ndarray
    c_hat: float
    c2: float
    apriori_factor: float
    slack: float

    @property
    def margins(self) -> np.ndarray:
        return self.bound - self.gap

    @property
    def passes(self) -> np.ndarray:
        return self.gap <= self.bound

    @property
    def passed(self) -> bool:
        return bool(np.all(self.passes))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'gap': self.gap,
            'bound': self.bound,
            'margin': self.margins,
            'pass': self.passes,
        })


@log_error
def stability_gap(traj1: Trajectory, traj2: Trajectory, grid: WeightedGrid, lambda1: float,
                  cfg: SolverConfig, *, c_hat: float) -> StabilityReport:
    """两条同系统、同强迫轨迹之差的 Gronwall 型稳定界

    Args:
        traj1: 第一条轨迹
        traj2: 第二条轨迹（指数中使用它的 ‖ξ₂‖²_V）
        grid: 加权网格
        lambda1: 最小特征值
        cfg: 求解参数
        c_hat: 经验 Ladyzhenskaya 常数

    Returns:
        StabilityReport
    """
    if traj1.time != traj2.time or traj1.time != cfg.time:
        raise InputError("两条轨迹的时间网格不一致")
    if traj1.system_fingerprint != traj2.system_fingerprint or not np.array_equal(traj1.lambdas, traj2.lambdas):
        raise InputError("两条轨迹来自不同的 Galerkin 系统")
    if not np.array_equal(traj1.eta, traj2.eta):
        raise InputError("两条轨迹的强迫项不同")
    if not c_hat >= 0:
        raise InputError(f"Ladyzhenskaya 常数必须非负: {c_hat}", c_hat=c_hat)

    w = traj1.xi - traj2.xi
    gap = np.sum(w ** 2, axis=1)
    c2 = c_hat ** 2 / cfg.nu
    exponent = c2 * _rl_integral_series(cfg.alpha, traj2.enstrophy, traj2)
    with np.errstate(over='ignore'):
        bound = cfg.certificate_slack * gap[0] * np.exp(exponent)

    verdict = check_Hg(grid, lambda1)
    if verdict.holds:
        nu_prime = cfg.nu * verdict.nu_prime_factor
        source = _source_integral(traj2, cfg.alpha1)[-1]
        b = cfg.b
        time_term = traj2.time.T ** (1.0 + b) / (1.0 + b)
        energy_bound = traj2.energy[0] + source / nu_prime + time_term / nu_prime
        with np.errstate(over='ignore'):
            apriori = float(np.exp(c2 / gamma(cfg.alpha) * energy_bound))
    else:
        apriori = float('inf')

    report = StabilityReport(
        times=traj1.times, gap=gap, bound=bound, c_hat=float(c_hat), c2=float(c2),
        apriori_factor=apriori, slack=cfg.certificate_slack,
    )
    log_with_context(logger, 'info', "稳定性核验完成", passed=report.passed, c2=f"{c2:.6g}")
    return report
