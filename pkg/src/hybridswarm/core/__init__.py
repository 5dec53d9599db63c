"""Single-process PDMP and SHS primitives."""

from .flow import flow, integrate_field, sde_step
from .pdmp import FlowCursor, sample_reset, sample_sojourn, simulate_pdmp
from .shs import first_exit_times, simulate_shs
from .specs import (
    FORCED,
    SPONTANEOUS,
    AffineNormRate,
    ConstantDiffusion,
    ConstantField,
    ConstantRate,
    GaussianKernel,
    HybridState,
    JumpRecord,
    LinearField,
    ModeSpec,
    OrnsteinUhlenbeckDrift,
    PdmpSpec,
    PointMass,
    ShsSpec,
    Trajectory,
    UniformBox,
    ZeroDiffusion,
    diffusion_from_dict,
    kernel_from_dict,
    rate_from_dict,
    vector_field_from_dict,
)
