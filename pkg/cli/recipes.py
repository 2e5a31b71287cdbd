"""由运行配置构造网格、初值、强迫与控制问题"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from cli.config import ForcingSection, GridSection, InitialSection, RunConfig
from control.problem import ControlProblem, TrackingTarget
from fracops.grid import TimeGrid
from solver.config import SolverConfig
from solver.integrator import forcing_coeffs, project_initial, solve_ivp
from spectral.eigenbasis import GStokesBasis, eigenbasis
from spectral.galerkin import GalerkinSystem, build_galerkin_system
from utils.exceptions import ConfigError, GnseError
from utils.logger_config import get_logger, log_with_context
from wdomain.field_io import read_scalar_csv
from wdomain.grid import ScalarField, VelocityField, WeightedGrid, WeightRecipe, build_weight
from wdomain.operators import gradient, leray_project_g, weighted_inner

logger = get_logger(__name__)


def build_grid(section: GridSection) -> WeightedGrid:
    if section.weight == 'constant':
        recipe = WeightRecipe.constant(section.c)
    elif section.weight == 'sine':
        recipe = WeightRecipe.sine(section.epsilon)
    else:
        try:
            table = read_scalar_csv(section.table)
        except (OSError, GnseError) as e:
            raise ConfigError(f"无法读取权函数数据表 {section.table}: {e}", key='grid.table') from e
        if table.n != section.n:
            raise ConfigError("权函数数据表尺寸与 grid.n 不一致", key='grid.table')
        recipe = WeightRecipe.tabulated(table.values)
    return build_weight(recipe, section.n)


def taylor_green(grid: WeightedGrid, amplitude: float = 1.0) -> VelocityField:
    """u = A(sin 2πx cos 2πy, −cos 2πx sin 2πy)"""
    x, y = grid.coordinates()
    sx, cx = np.sin(2.0 * np.pi * x), np.cos(2.0 * np.pi * x)
    sy, cy = np.sin(2.0 * np.pi * y), np.cos(2.0 * np.pi * y)
    return VelocityField(amplitude * sx * cy, -amplitude * cx * sy)


def build_initial(section: InitialSection, basis: GStokesBasis) -> VelocityField:
    grid = basis.grid
    if section.recipe == 'zero':
        return VelocityField.zeros(grid.n)
    if section.recipe == 'mode':
        return basis.mode(section.mode - 1) * section.amplitude
    if section.recipe == 'taylor_green':
        return leray_project_g(taylor_green(grid, section.amplitude), grid)
    rng = np.random.default_rng(section.seed)
    noise = VelocityField(rng.standard_normal((grid.n, grid.n)), rng.standard_normal((grid.n, grid.n)))
    field = leray_project_g(noise, grid)
    norm = np.sqrt(weighted_inner(field, field, grid))
    return field * (section.amplitude / norm) if norm > 0 else field


def forcing_source(section: ForcingSection, basis: GStokesBasis) -> Callable[[float], VelocityField]:
    """返回 t -> f(t)"""
    grid = basis.grid
    amplitude = section.amplitude
    if section.recipe == 'zero':
        zero = VelocityField.zeros(grid.n)
        return lambda t: zero
    if section.recipe == 'taylor_green':
        field = taylor_green(grid, amplitude)
        return lambda t: field
    if section.recipe == 'gradient':
        x, y = grid.coordinates()
        potential = ScalarField(np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y))
        field = gradient(potential, grid) * amplitude
        return lambda t: field
    mode = basis.mode(section.mode - 1)
    if section.recipe == 'mode':
        field = mode * amplitude
        return lambda t: field
    if section.recipe == 'oscillating_mode':
        return lambda t: mode * (amplitude * np.cos(section.omega * t))
    zero = VelocityField.zeros(grid.n)
    return lambda t: mode * amplitude if t <= section.duration else zero


@dataclass
class RunSetup:
    """一次运行共享的离散对象"""

    run: RunConfig
    grid: WeightedGrid
    basis: GStokesBasis
    system: GalerkinSystem
    cfg: SolverConfig
    xi0: np.ndarray
    eta: np.ndarray

    @property
    def time(self) -> TimeGrid:
        return self.cfg.time


def build_setup(run: RunConfig, basis: Optional[GStokesBasis] = None) -> RunSetup:
    grid = basis.grid if basis is not None else build_grid(run.grid)
    basis = basis if basis is not None else eigenbasis(grid, run.solver.m)
    system = build_galerkin_system(basis, run.solver.nu)
    cfg = run.solver_config()
    xi0 = project_initial(build_initial(run.initial, basis), basis)
    eta = forcing_coeffs(forcing_source(run.forcing, basis), basis, cfg.time)
    log_with_context(logger, 'info', "运行对象构造完成", n=grid.n, m=basis.m, n_steps=cfg.n_steps)
    return RunSetup(run=run, grid=grid, basis=basis, system=system, cfg=cfg, xi0=xi0, eta=eta)


def build_control_problem(setup: RunSetup) -> ControlProblem:
    """执行器取若干特征模式；目标为前向生成的 w* 轨迹或无控制轨迹"""
    section = setup.run.control
    actuators = tuple(setup.basis.mode(k - 1) for k in section.actuator_modes)
    common = dict(
        basis=setup.basis, system=setup.system, cfg=setup.cfg, xi0=setup.xi0, eta_base=setup.eta,
        actuators=actuators, kappa=section.kappa, box_lo=section.box_lo, box_hi=section.box_hi,
    )
    draft = ControlProblem(z_target=TrackingTarget.zero(setup.time, setup.basis.m), **common)
    if section.target == 'unforced':
        target = TrackingTarget.from_trajectory(solve_ivp(setup.system, setup.cfg, setup.xi0, setup.eta))
    else:
        w_star = np.full(draft.control_shape, section.target_amplitude)
        if np.any(w_star < draft.box_lo) or np.any(w_star > draft.box_hi):
            raise ConfigError("target_amplitude 超出容许集", key='control.target_amplitude')
        target = TrackingTarget.from_trajectory(
            solve_ivp(setup.system, setup.cfg, setup.xi0, draft.forcing_eta(w_star))
        )
    return ControlProblem(z_target=target, **common)
