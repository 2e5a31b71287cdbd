"""`gnse verify` 的不变量检查集

每个检查返回 (是否通过, 测量值)。名称以模块名开头，便于 --filter 选择。
给出 --config 时另外追加 config.* 检查，在配置描述的网格与求解参数上运行。
"""
import functools
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import erfc, gamma

from cli.config import RunConfig
from cli.recipes import build_setup, taylor_green
from control.optimizer import MinimizeOptions, fd_gradient, minimize
from control.problem import ControlProblem, TrackingTarget, solution_map
from fracops import caputo
from fracops.grid import FractionalOrder, SampledFunction, TimeGrid
from fracops.integrals import ibp_residual, rl_integral_left
from fracops.mittag_leffler import mittag_leffler
from solver.config import SolverConfig
from solver.certificates import energy_certificate, stability_gap
from solver.integrator import project_initial, solve_ivp
from solver.reference import implicit_euler_reference
from spectral.eigenbasis import GStokesBasis, eigenbasis
from spectral.galerkin import GalerkinSystem, build_galerkin_system, ladyzhenskaya_ratio
from utils.exceptions import GnseError
from utils.logger_config import get_logger, log_with_context
from wdomain.grid import VelocityField, WeightRecipe, build_weight
from wdomain.operators import check_Hg, div_g, leray_project_g, weighted_inner

logger = get_logger(__name__)

CheckResult = Tuple[bool, float]

COLUMNS = ['name', 'passed', 'measured', 'note']


@dataclass(frozen=True)
class VerifyCheck:
    name: str
    run: Callable[[], CheckResult]
    full_only: bool = False
    note: str = ''

    @property
    def module(self) -> str:
        return self.name.split('.', 1)[0]


CHECKS: List[VerifyCheck] = []


def check(name: str, full_only: bool = False, note: str = ''):
    def register(fn: Callable[[], CheckResult]) -> Callable[[], CheckResult]:
        CHECKS.append(VerifyCheck(name, fn, full_only, note))
        return fn
    return register


def _l1_at_one(alpha: float, power: int, n_steps: int) -> float:
    grid = TimeGrid(1.0 / n_steps, n_steps)
    history = SampledFunction.from_callable(grid, lambda t: t ** power)
    # 通过模块属性调用，变异测试可替换 l1_weights
    return caputo.caputo_l1_apply(FractionalOrder(alpha), history, n_steps)


@check('fracops.caputo_power_t')
def _caputo_power_t() -> CheckResult:
    error = abs(_l1_at_one(0.5, 1, 256) - 1.0 / gamma(1.5))
    return error <= 1e-10, error


@check('fracops.caputo_power_t2')
def _caputo_power_t2() -> CheckResult:
    error = abs(_l1_at_one(0.5, 2, 256) - gamma(3.0) / gamma(2.5))
    return error <= 5e-3, error


def l1_empirical_rate(alpha: float, steps=(16, 32, 64, 128, 256)) -> float:
    """t² 在 t=1 处 L1 误差对 log2(n) 的最小二乘斜率"""
    exact = gamma(3.0) / gamma(3.0 - alpha)
    errors = [abs(_l1_at_one(alpha, 2, n) - exact) for n in steps]
    slope, _ = np.polyfit(np.log2(steps), np.log2(errors), 1)
    return float(-slope)


@check('fracops.l1_order', note='n=16..256 上拟合的阶与 2−α 之差的最大值')
def _l1_order() -> CheckResult:
    worst = max(abs(l1_empirical_rate(alpha) - (2.0 - alpha)) for alpha in (0.3, 0.5, 0.8))
    return worst <= 0.25, worst


@check('fracops.mittag_leffler_closed_forms')
def _mittag_leffler_closed_forms() -> CheckResult:
    error = max(
        abs(mittag_leffler(FractionalOrder(1.0), -1.0) - math.exp(-1.0)),
        abs(mittag_leffler(FractionalOrder(0.5), -1.0) - math.exp(1.0) * erfc(1.0)),
    )
    return error <= 1e-12, error


@check('fracops.mittag_leffler_exp')
def _mittag_leffler_exp() -> CheckResult:
    order = FractionalOrder(1.0)
    worst = max(
        abs(mittag_leffler(order, z) - math.exp(z)) / max(1.0, math.exp(z))
        for z in np.linspace(-10.0, 10.0, 41)
    )
    return worst <= 1e-10, worst


@check('fracops.semigroup')
def _semigroup() -> CheckResult:
    order = FractionalOrder(0.5)
    f = SampledFunction.from_callable(TimeGrid(1.0 / 256, 256), lambda t: t)
    integral = SampledFunction(f.grid, [rl_integral_left(order, f, n) for n in range(257)])
    error = float(np.max(np.abs(caputo.caputo_l1_series(order, integral) - f.values)))
    return error <= 1e-2, error


@check('fracops.ibp_residual')
def _ibp() -> CheckResult:
    grid = TimeGrid(1.0 / 512, 512)
    u = SampledFunction.from_callable(grid, lambda t: 1.0 + t ** 2)
    psi = SampledFunction.from_callable(grid, lambda t: (1.0 - t) ** 2)
    residual = ibp_residual(FractionalOrder(0.5), u, psi)
    return residual <= 1e-3, residual


@functools.lru_cache(maxsize=None)
def _smoke(n: int = 32, m: int = 8, epsilon: float = 0.1):
    grid = build_weight(WeightRecipe.sine(epsilon), n)
    basis = eigenbasis(grid, m)
    return grid, basis, build_galerkin_system(basis, 0.05)


def _taylor_green_xi(basis, amplitude: float = 0.5) -> np.ndarray:
    return project_initial(leray_project_g(taylor_green(basis.grid, amplitude), basis.grid), basis)


def _random_fields(rng, n: int, count: int) -> List[VelocityField]:
    return [VelocityField(rng.standard_normal((n, n)), rng.standard_normal((n, n))) for _ in range(count)]


@check('wdomain.leray_projection')
def _leray() -> CheckResult:
    grid = build_weight(WeightRecipe.sine(0.1), 16)
    u, = _random_fields(np.random.default_rng(0), 16, 1)
    v = leray_project_g(u, grid)
    twice = leray_project_g(v, grid)
    residual = max(
        float(np.max(np.abs(div_g(v, grid).values))),
        float(np.max(np.abs(twice.components - v.components))),
    )
    return residual <= 1e-10, residual


@check('wdomain.norm_equivalence', note='m0|u|² ≤ |u|²_g ≤ M0|u|² 的最大相对越界量')
def _norm_equivalence() -> CheckResult:
    rng = np.random.default_rng(2)
    worst = -np.inf
    for epsilon in (0.1, 0.3):
        grid = build_weight(WeightRecipe.sine(epsilon), 16)
        for u in _random_fields(rng, 16, 50):
            plain = grid.h ** 2 * float(np.sum(u.components ** 2))
            value = weighted_inner(u, u, grid)
            worst = max(worst, (grid.m0 * plain - value) / value, (value - grid.M0 * plain) / value)
    return worst <= 1e-12, worst


@check('wdomain.inner_bilinearity')
def _inner_bilinearity() -> CheckResult:
    rng = np.random.default_rng(3)
    grid = build_weight(WeightRecipe.sine(0.1), 16)
    worst = 0.0
    for _ in range(20):
        u, v, w = _random_fields(rng, 16, 3)
        a, b = rng.standard_normal(2)
        scale = math.sqrt(weighted_inner(u, u, grid) * weighted_inner(w, w, grid)) + \
            math.sqrt(weighted_inner(v, v, grid) * weighted_inner(w, w, grid))
        linear = weighted_inner(u * a + v * b, w, grid) - a * weighted_inner(u, w, grid) - b * weighted_inner(v, w, grid)
        symmetric = weighted_inner(u, w, grid) - weighted_inner(w, u, grid)
        worst = max(worst, abs(linear) / (max(1.0, abs(a), abs(b)) * scale), abs(symmetric) / scale)
    return worst <= 1e-12, worst


@check('wdomain.hg_smoke_weight')
def _hg_smoke() -> CheckResult:
    grid, basis, _ = _smoke()
    verdict = check_Hg(grid, basis.lambda1)
    return verdict.holds, verdict.margin


def _constant_spectrum(n: int) -> CheckResult:
    basis = eigenbasis(build_weight(WeightRecipe.constant(1.0), n), 4)
    error = float(np.max(np.abs(basis.lambdas / (4.0 * np.pi ** 2) - 1.0)))
    return error <= 0.02, error


@check('spectral.constant_weight_spectrum')
def _constant_spectrum_default() -> CheckResult:
    return _constant_spectrum(32)


@check('spectral.constant_weight_spectrum_n64', full_only=True)
def _constant_spectrum_full() -> CheckResult:
    return _constant_spectrum(64)


@check('spectral.lambda1_lower_bound')
def _lambda1_bound() -> CheckResult:
    grid, basis, _ = _smoke()
    ratio = basis.lambda1 / (4.0 * np.pi ** 2 * grid.m0 / grid.M0)
    return ratio >= 0.95, ratio


@check('spectral.orthonormality')
def _orthonormality() -> CheckResult:
    _, basis, _ = _smoke()
    residual = basis.orthonormality_residual()
    return residual <= 1e-10, residual


def _worst_neutrality(system: GalerkinSystem, seed: int = 1, samples: int = 100) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        xi = rng.standard_normal(system.m)
        worst = max(worst, abs(float(xi @ system.nonlinear(xi))) / np.linalg.norm(xi) ** 3)
    return worst


@check('spectral.energy_neutrality')
def _neutrality() -> CheckResult:
    _, _, system = _smoke(16, 16)
    worst = _worst_neutrality(system)
    return worst <= 1e-12, worst


def ladyzhenskaya_growth(ns, m: int = 8) -> Tuple[np.ndarray, float]:
    """各网格上 500 个随机场的经典形式比值，以及相邻加密之间的最大增长倍数"""
    ratios = np.array([ladyzhenskaya_ratio(_smoke(n, m)[2], samples=500).classical for n in ns])
    log_with_context(logger, 'info', "Ladyzhenskaya 比值", n=list(ns), ratios=np.round(ratios, 6).tolist())
    return ratios, float(np.max(ratios[1:] / ratios[:-1]))


@check('spectral.ladyzhenskaya_refinement', note='n=16→32 比值的增长倍数，上限 1.25')
def _ladyzhenskaya_refinement() -> CheckResult:
    ratios, growth = ladyzhenskaya_growth((16, 32))
    return bool(np.all(np.isfinite(ratios))) and growth <= 1.25, growth


@check('spectral.ladyzhenskaya_n64', full_only=True, note='n=16→32→64 比值的最大增长倍数，上限 1.25')
def _ladyzhenskaya() -> CheckResult:
    ratios, growth = ladyzhenskaya_growth((16, 32, 64))
    return bool(np.all(np.isfinite(ratios))) and growth <= 1.25, growth


@functools.lru_cache(maxsize=None)
def _ml_trajectory():
    cfg = SolverConfig(alpha=0.5, nu=1.0, dt=1.0 / 512, n_steps=512)
    system = GalerkinSystem(np.ones(1), np.zeros((1, 1)), np.zeros((1, 1, 1)), nu=1.0)
    traj = solve_ivp(system, cfg, np.ones(1), np.zeros((513, 1)))
    exact = np.array([mittag_leffler(cfg.order, -t ** 0.5) for t in traj.times])
    return traj, np.abs(traj.xi[:, 0] - exact)


@check('solver.mittag_leffler_oracle', note='t ≥ 0.1；t=0 附近的初始层见 mittag_leffler_full_window')
def _ml_oracle() -> CheckResult:
    traj, errors = _ml_trajectory()
    error = float(np.max(errors[traj.times >= 0.1]))
    return error <= 5e-3, error


@check('solver.mittag_leffler_full_window', note='[0,1] 全区间；初始层误差约 0.24·dt^α，上限放宽到 2e-2')
def _ml_full_window() -> CheckResult:
    _, errors = _ml_trajectory()
    error = float(np.max(errors))
    return error <= 2e-2, error


def _smoke_config(alpha: float) -> SolverConfig:
    return SolverConfig.from_horizon(alpha=alpha, nu=0.05, T=0.5, dt=1.0 / 256)


@functools.lru_cache(maxsize=None)
def _smoke_trajectory():
    _, basis, system = _smoke()
    cfg = _smoke_config(0.5)
    return solve_ivp(system, cfg, _taylor_green_xi(basis), np.zeros((cfg.n_steps + 1, system.m)))


@check('solver.smoke_certificate')
def _smoke_certificate() -> CheckResult:
    grid, basis, _ = _smoke()
    certificate = energy_certificate(_smoke_trajectory(), grid, basis.lambda1, _smoke_config(0.5))
    return certificate.passed, float(certificate.margins('sup').min())


@check('solver.cmat_energy_bound', note='|ξᵀCξ| 与 |∇g|∞/(m0√λ1)·Σλξ² 之比的最大值')
def _cmat_bound() -> CheckResult:
    grid, basis, system = _smoke()
    bound = grid.grad_g_sup / (grid.m0 * np.sqrt(basis.lambda1))
    rng = np.random.default_rng(4)
    samples = np.vstack([_smoke_trajectory().xi[1:], rng.standard_normal((200, system.m))])
    worst = 0.0
    for xi in samples:
        enstrophy = float(system.energy_norm_sq(xi))
        if enstrophy > 0.0:
            worst = max(worst, abs(float(xi @ system.Cmat @ xi)) / (bound * enstrophy))
    return worst <= 1.0 + 1e-6, worst


@check('solver.alpha_one_consistency')
def _alpha_one() -> CheckResult:
    _, basis, system = _smoke()
    cfg = _smoke_config(0.999)
    xi0 = _taylor_green_xi(basis)
    eta = np.zeros((cfg.n_steps + 1, system.m))
    traj = solve_ivp(system, cfg, xi0, eta)
    reference = implicit_euler_reference(system, cfg.time, xi0, eta)
    difference = float(np.max(np.abs(traj.xi - reference)))
    return difference <= 1e-2, difference


def galerkin_refinement_gaps(n: int = 32, ms=(4, 8, 16)) -> np.ndarray:
    """|u^{(m)}(T) − u^{(2m)}(T)|_g，m 取 ms 中各值

    各截断共用同一组特征模式的前缀，强迫为 0.1·φ_1。
    """
    grid = build_weight(WeightRecipe.sine(0.1), n)
    full = eigenbasis(grid, 2 * max(ms))
    cfg = _smoke_config(0.5)
    u0 = leray_project_g(taylor_green(grid, 0.5), grid)
    finals = {}
    for m in sorted(set(ms) | {2 * k for k in ms}):
        basis = GStokesBasis(grid=grid, lambdas=full.lambdas[:m], modes=full.modes[:m])
        eta = np.zeros((cfg.n_steps + 1, m))
        eta[:, 0] = 0.1
        traj = solve_ivp(build_galerkin_system(basis, 0.05), cfg, project_initial(u0, basis), eta)
        finals[m] = basis.synthesize(traj.xi[-1])
    gaps = []
    for m in ms:
        diff = finals[m] - finals[2 * m]
        gaps.append(np.sqrt(weighted_inner(diff, diff, grid)))
    return np.array(gaps)


@check('solver.galerkin_refinement')
def _refinement() -> CheckResult:
    gaps = galerkin_refinement_gaps()
    return bool(np.all(np.diff(gaps) <= 0.0)), float(gaps[-1])


@check('solver.stability_gap')
def _stability() -> CheckResult:
    grid, basis, system = _smoke()
    cfg = _smoke_config(0.5)
    xi0 = _taylor_green_xi(basis)
    eta = np.zeros((cfg.n_steps + 1, system.m))
    perturbed = xi0 + 1e-6 * np.eye(system.m)[0]
    c_hat = ladyzhenskaya_ratio(system, samples=200).classical
    report = stability_gap(
        solve_ivp(system, cfg, perturbed, eta), solve_ivp(system, cfg, xi0, eta),
        grid, basis.lambda1, cfg, c_hat=c_hat,
    )
    return report.passed, float(report.margins.min())


@functools.lru_cache(maxsize=None)
def quadratic_control_problem() -> ControlProblem:
    """线性化状态方程、p=2 的小型跟踪问题，目标由 w ≡ 0.5 前向生成"""
    _, basis, system = _smoke(16, 4)
    cfg = SolverConfig(alpha=0.5, nu=0.05, dt=1.0 / 32, n_steps=8)
    common = dict(
        basis=basis, system=system.linearized(), cfg=cfg, xi0=_taylor_green_xi(basis),
        eta_base=np.zeros((cfg.n_steps + 1, basis.m)), actuators=(basis.mode(0),),
        kappa=0.1, box_lo=-2.0, box_hi=2.0, cost_exponent=2.0,
    )
    draft = ControlProblem(z_target=TrackingTarget.zero(cfg.time, basis.m), **common)
    target = TrackingTarget.from_trajectory(solution_map(np.full(draft.control_shape, 0.5), draft))
    return ControlProblem(z_target=target, **common)


def quadratic_gradient(w: np.ndarray, prob: ControlProblem) -> np.ndarray:
    """线性状态方程、p=2 时 J 的解析梯度

    ξ(w) 关于 w 是仿射的，单位控制的解减去零控制的解即为敏感度；
    ∇J = Σ_n c_n·dt·S_nᵀ(ξ_n − ζ_n) + 2·dt·κ·w，c_n 为梯形权重。
    """
    base = solution_map(prob.zeros(), prob).xi
    state = solution_map(w, prob).xi
    weights = np.full(state.shape[0], prob.cfg.dt)
    weights[[0, -1]] *= 0.5
    residual = (state - prob.z_target.zeta) * weights[:, None]
    grad = np.empty(prob.control_shape)
    for cell, comp in np.ndindex(*prob.control_shape):
        unit = prob.zeros()
        unit[cell, comp] = 1.0
        grad[cell, comp] = float(np.sum((solution_map(unit, prob).xi - base) * residual))
    return grad + 2.0 * prob.cfg.dt * prob.kappa * w


@check('control.superposition')
def _superposition() -> CheckResult:
    prob = quadratic_control_problem()
    rng = np.random.default_rng(5)
    w1, w2 = (rng.uniform(-0.5, 0.5, prob.control_shape) for _ in range(2))
    combined = solution_map(w1 + w2, prob).xi - solution_map(w1, prob).xi - solution_map(w2, prob).xi
    error = float(np.max(np.abs(combined + solution_map(prob.zeros(), prob).xi)))
    return error <= 1e-9, error


@check('control.gradient_closed_form', note='有限差分梯度与线性-二次问题解析梯度的相对误差')
def _gradient_closed_form() -> CheckResult:
    prob = quadratic_control_problem()
    w = np.linspace(-0.5, 0.5, prob.control_shape[0])[:, None]
    exact = quadratic_gradient(w, prob)
    error = float(np.max(np.abs(fd_gradient(w, prob, 1e-6) - exact)) / np.max(np.abs(exact)))
    return error <= 1e-6, error


@check('control.quadratic_minimize', note='J 终值/初值；要求每个迭代点在盒内且 J 单调不增')
def _quadratic_minimize() -> CheckResult:
    prob = quadratic_control_problem()
    log = minimize(prob, prob.zeros(), MinimizeOptions(max_iters=20, tol=1e-8))
    feasible = all(np.all((item.w >= prob.box_lo) & (item.w <= prob.box_hi)) for item in log)
    monotone = all(after.J <= before.J for before, after in zip(log, log[1:]))
    ratio = log[-1].J / log[0].J
    return bool(feasible and monotone and ratio < 1.0), ratio


def config_checks(run: RunConfig) -> List[VerifyCheck]:
    """在配置给出的网格、基和求解参数上运行的检查"""
    setup = functools.lru_cache(maxsize=None)(lambda: build_setup(run))

    def hg() -> CheckResult:
        verdict = check_Hg(setup().grid, setup().basis.lambda1)
        return verdict.holds, verdict.margin

    def orthonormality() -> CheckResult:
        residual = setup().basis.orthonormality_residual()
        return residual <= 1e-10, residual

    def neutrality() -> CheckResult:
        worst = _worst_neutrality(setup().system)
        return worst <= 1e-12, worst

    def certificate() -> CheckResult:
        s = setup()
        traj = solve_ivp(s.system, s.cfg, s.xi0, s.eta)
        result = energy_certificate(traj, s.grid, s.basis.lambda1, s.cfg)
        return result.passed, float(result.margins('sup').min())

    return [
        VerifyCheck('config.hg', hg, note=f'n={run.grid.n} weight={run.grid.weight}'),
        VerifyCheck('config.orthonormality', orthonormality, note=f'm={run.solver.m}'),
        VerifyCheck('config.energy_neutrality', neutrality),
        VerifyCheck('config.energy_certificate', certificate, note=f'alpha={run.frac.alpha} T={run.solver.T}'),
    ]


def run_checks(name_filter: Optional[str] = None, full: bool = False,
               run: Optional[RunConfig] = None) -> pd.DataFrame:
    """执行选中的检查，返回 name/passed/measured/note 表"""
    checks = CHECKS + (config_checks(run) if run is not None else [])
    rows = []
    for item in checks:
        if item.full_only and not full:
            continue
        if name_filter and not (item.module == name_filter or item.name.startswith(name_filter)):
            continue
        try:
            passed, measured = item.run()
        except GnseError as e:
            log_with_context(logger, 'error', "检查执行失败", check=item.name, error=e)
            passed, measured = False, float('nan')
        rows.append({'name': item.name, 'passed': bool(passed), 'measured': float(measured), 'note': item.note})
    return pd.DataFrame(rows, columns=COLUMNS)
