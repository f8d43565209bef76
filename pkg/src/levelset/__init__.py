"""Chan-Vese level-set segmentation with a differentiable unrolled solver.

Core value types live in `fields`, distance-field machinery in `tsdf`,
discrete operators in `diffops`, the energy and solver in `chanvese`,
exact reverse-mode gradients in `autodiff`, losses and metrics in
`metrics`, synthetic test instances in `synth`, and the file formats
plus CLI in `fileio`/`cli`.
"""

from .autodiff import (
    EvolutionTape,
    GradcheckReport,
    GradientBundle,
    backward,
    evolve_recorded,
    finite_difference_oracle,
    run_gradcheck,
)
from .chanvese import (
    EvolutionResult,
    EvolveOptions,
    HyperRangeWarning,
    InstanceHypers,
    RegionConstants,
    classic_chanvese,
    descent_direction,
    energy,
    evolve,
    region_constants,
)
from .diffops import VectorField2, curvature, divergence, sobel_gradient
from .errors import (
    DimensionError,
    DivergenceError,
    FieldFormatError,
    GenerationError,
    LevelSetError,
    ParameterError,
)
from .fields import (
    BinaryMask,
    FeatureField,
    ScalarField,
    Tsdf,
    bilinear_resize,
    new_scalar_field,
)
from .metrics import (
    LossWeights,
    boundary_f1,
    boundary_pixels,
    combined_loss,
    mask_iou,
    matched_average_precision,
    tsdf_loss,
    tsdf_loss_grad,
)
from .synth import SynthSpec, coarse_init, generate, grayscale_projection
from .tsdf import (
    SoftParams,
    chain_contours,
    contour_count,
    default_truncation_radius,
    dirac_soft,
    heaviside_soft,
    mask_from_tsdf,
    signed_distance,
    truncate_normalize,
    tsdf_from_mask,
    zero_crossings,
)

__version__ = "0.1.0"
