# spectral包初始化文件：g-Stokes 特征基与 Galerkin 系统
from .assembly import GStokesOperators, assemble_gstokes
from .eigenbasis import GStokesBasis, divergence_free_frame, eigenbasis, subspace_dimension
from .galerkin import (
    MAX_TENSOR_MODES,
    GalerkinSystem,
    LadyzhenskayaEstimate,
    build_galerkin_system,
    cg_matrix,
    convection_tensor,
    ladyzhenskaya_ratio,
    trilinear_bg,
)
from .export import export_basis, spectrum_frame

__all__ = [
    'GStokesBasis',
    'GStokesOperators',
    'GalerkinSystem',
    'LadyzhenskayaEstimate',
    'MAX_TENSOR_MODES',
    'assemble_gstokes',
    'build_galerkin_system',
    'cg_matrix',
    'convection_tensor',
    'divergence_free_frame',
    'eigenbasis',
    'export_basis',
    'ladyzhenskaya_ratio',
    'spectrum_frame',
    'subspace_dimension',
    'trilinear_bg',
]
