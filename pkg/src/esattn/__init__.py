"""Effects-sensitive attention modulation with numerical certification,
plus the geometric transformation pipeline that prepares in-context
editing inputs (appearance reference and target mask)."""

from .attention import (
    EsaConfig,
    HardLimitForm,
    RegionPartition,
    build_logits,
    compute_delta,
    esa_attention,
    esa_attention_fixed_delta,
    hard_attention_limit,
    hard_attention_surrogate,
    standard_attention,
)
from .errors import (
    DegenerateRenderError,
    DomainError,
    MeshParseError,
    ShapeError,
)
from .geometry import (
    Mesh,
    Raster,
    Rotation,
    TransformSpec,
    apply_transform,
    load_mesh,
    parse_mesh,
    place_at,
    rasterize_mesh,
    render_rotated,
    scale_object,
    translate_mask,
)
from .imaging import (
    Heatmap,
    InContextPair,
    attention_heatmap,
    compose_incontext,
    prepare_masked_scene,
)
from .numerics import (
    INFINITE_KL,
    column_softmax,
    columnwise_softmax,
    kl_divergence,
    population_std,
    softmax_jacobian,
)
from .theory import (
    IdealAttention,
    IdealSpec,
    TheoremReport,
    check_ideal_conditions,
    sample_ideal,
    sweep_alpha,
    verify_statement_1,
    verify_statement_2,
    verify_theorem,
)

__version__ = "0.1.0"

__all__ = [
    "EsaConfig",
    "HardLimitForm",
    "RegionPartition",
    "build_logits",
    "compute_delta",
    "esa_attention",
    "esa_attention_fixed_delta",
    "hard_attention_limit",
    "hard_attention_surrogate",
    "standard_attention",
    "DegenerateRenderError",
    "DomainError",
    "MeshParseError",
    "ShapeError",
    "Mesh",
    "Raster",
    "Rotation",
    "TransformSpec",
    "apply_transform",
    "load_mesh",
    "parse_mesh",
    "place_at",
    "rasterize_mesh",
    "render_rotated",
    "scale_object",
    "translate_mask",
    "Heatmap",
    "InContextPair",
    "attention_heatmap",
    "compose_incontext",
    "prepare_masked_scene",
    "INFINITE_KL",
    "column_softmax",
    "columnwise_softmax",
    "kl_divergence",
    "population_std",
    "softmax_jacobian",
    "IdealAttention",
    "IdealSpec",
    "TheoremReport",
    "check_ideal_conditions",
    "sample_ideal",
    "sweep_alpha",
    "verify_statement_1",
    "verify_statement_2",
    "verify_theorem",
]
