"""Phaseless blind image deblurring under generative priors.

Recovers a sharp image and a blur kernel from magnitude-only measurements of
their circular convolution by alternating gradient descent over the latent
inputs of two pre-trained generative decoders.
"""

from .errors import (
    BadCrc,
    BadLength,
    BadMagic,
    BadSize,
    ConfigError,
    DimChainMismatch,
    DimensionMismatch,
    EmptyMeasurement,
    KernelTooLarge,
    NonFiniteLoss,
    NonFiniteOutput,
    PhaselessDeblurError,
    TooSmall,
    UnknownLayerKind,
)
from .grids import ComplexVector, KernelGrid, RealGrid, circular_convolve, convolve_vjp, fft2, ifft2
from .forward import (
    FpOperator,
    Measurement,
    OversampledFourierOp,
    PupilMask,
    SubsampleMask,
    add_noise,
    adjoint_apply,
    apply_fourier,
    apply_fp,
    build_fp_operator,
    magnitude,
    operator_from_json,
    operator_to_json,
    subsampling_ratio,
)
from .priors import (
    GeneratorModel,
    LatentVector,
    LayerSpec,
    generate,
    generate_vjp,
    linear_subspace_generator,
    load_bundle,
    save_bundle,
)
from .solver import AdamState, RecoveryResult, SolverConfig, adam_step, loss, loss_gradients, recover
from .blursynth import BlurConfig, embed_kernel, gaussian_kernel, generate_dataset, motion_kernel
from .metrics import AlignmentReport, align_and_score, psnr, ssim

__version__ = "0.1.0"
