# wdomain包初始化文件：周期加权网格及其上的算子
from .grid import ScalarField, VelocityField, WeightedGrid, WeightRecipe, build_weight
from .operators import (
    HgVerdict,
    check_Hg,
    div_g,
    gradient,
    leray_project_g,
    weighted_h1_inner,
    weighted_inner,
)
from .field_io import (
    read_scalar_csv,
    read_velocity_csv,
    scalar_to_frame,
    velocity_to_frame,
    write_frame,
)

__all__ = [
    'HgVerdict',
    'ScalarField',
    'VelocityField',
    'WeightRecipe',
    'WeightedGrid',
    'build_weight',
    'check_Hg',
    'div_g',
    'gradient',
    'leray_project_g',
    'read_scalar_csv',
    'read_velocity_csv',
    'scalar_to_frame',
    'velocity_to_frame',
    'weighted_h1_inner',
    'weighted_inner',
    'write_frame',
]
