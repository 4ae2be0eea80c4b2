"""Concrete physics mapped onto the general constitutive framework."""
from .acoustic import (
    AcousticMedium,
    AcousticZ,
    acoustic_assemble_Y,
    acoustic_kappa_real_Y,
    acoustic_pde_residual,
    acoustic_rho_real_Y,
    acoustic_to_Z,
    em_scene,
    em_to_acoustic,
    rho_real_pressure,
)
from .dissipation import boundary_dissipation, dissipation, dtn_dissipation
from .elastic import (
    ElasticMedium,
    elastic_assemble_Q,
    elastic_cell_Z,
    elastic_dense_oracle,
    elastic_fields,
    elastic_residual,
    elastic_solve_direct,
    mandel_from_lame,
    symmetric_projector,
)

__all__ = [
    "AcousticMedium",
    "AcousticZ",
    "ElasticMedium",
    "acoustic_assemble_Y",
    "acoustic_kappa_real_Y",
    "acoustic_pde_residual",
    "acoustic_rho_real_Y",
    "acoustic_to_Z",
    "boundary_dissipation",
    "dissipation",
    "dtn_dissipation",
    "elastic_assemble_Q",
    "elastic_cell_Z",
    "elastic_dense_oracle",
    "elastic_fields",
    "elastic_residual",
    "elastic_solve_direct",
    "em_scene",
    "em_to_acoustic",
    "mandel_from_lame",
    "rho_real_pressure",
    "symmetric_projector",
]
