# fracops包初始化文件：分数阶微积分基本运算
from .grid import FractionalOrder, SampledFunction, TimeGrid
from .caputo import caputo_energy_gap, caputo_l1_apply, caputo_l1_series, l1_weights
from .integrals import (
    gronwall_bound,
    ibp_residual,
    kernel_eval,
    product_weights,
    rl_derivative_right,
    rl_integral_left,
    rl_integral_right,
)
from .mittag_leffler import mittag_leffler, mittag_leffler_array

__all__ = [
    'FractionalOrder',
    'SampledFunction',
    'TimeGrid',
    'caputo_energy_gap',
    'caputo_l1_apply',
    'caputo_l1_series',
    'gronwall_bound',
    'ibp_residual',
    'kernel_eval',
    'l1_weights',
    'mittag_leffler',
    'mittag_leffler_array',
    'product_weights',
    'rl_derivative_right',
    'rl_integral_left',
    'rl_integral_right',
]
