"""Single-image reflection separation via convolutional sparse coding.

The solver models an input as transmission plus blurred reflection, couples
each layer estimate to a sparse convolutional code, and untangles shared
detail with an undecimated-wavelet exclusion prox, refined coarse to fine.
"""

from .dictionary import (
    ConvDictionary,
    dct_dictionary,
    decode,
    encode_adjoint,
    grad_f,
    grad_h,
    lipschitz_estimate,
    load_dictionary,
    random_dictionary,
    save_dictionary,
)
from .errors import DimensionError, DivergenceError
from .metrics import (
    MetricsReport,
    exclusion_multiscale,
    exclusion_transform,
    psnr,
    reconstruction_loss,
    ssim,
)
from .operators import (
    Kernel2D,
    conv_adjoint,
    conv_apply,
    correlate_channelwise,
    edge_correlation_map,
    resize_bilinear,
    spatial_gradient,
)
from .pngio import load_png, quantize_u8, save_png
from .prox import ThresholdField, prox_exclusion, prox_feature, soft_threshold
from .report import render_trace_figure
from .solver import (
    IterationTrace,
    ObjectiveTerms,
    SolverConfig,
    SolverState,
    build_dictionaries,
    objective,
    separate,
    separation_layer,
    solve,
    solve_scale,
)
from .synth import (
    MixtureSpec,
    bundled_mixtures,
    gaussian_blur,
    gaussian_kernel,
    procedural_pair,
    synthesize_mixture,
)
from .wavelet import WaveletBank, WaveletPyramid, analyze, haar_bank, synthesize

__version__ = "0.1.0"

__all__ = [
    "ConvDictionary", "DimensionError", "DivergenceError", "IterationTrace",
    "Kernel2D", "MetricsReport", "MixtureSpec", "ObjectiveTerms",
    "SolverConfig", "SolverState", "ThresholdField", "WaveletBank",
    "WaveletPyramid", "analyze", "build_dictionaries", "bundled_mixtures",
    "conv_adjoint", "conv_apply", "correlate_channelwise", "dct_dictionary",
    "decode", "edge_correlation_map", "encode_adjoint", "exclusion_multiscale",
    "exclusion_transform", "gaussian_blur", "gaussian_kernel", "grad_f",
    "grad_h", "haar_bank", "lipschitz_estimate", "load_dictionary", "load_png",
    "objective", "procedural_pair", "prox_exclusion", "prox_feature", "psnr",
    "quantize_u8", "random_dictionary", "reconstruction_loss",
    "render_trace_figure", "resize_bilinear", "save_dictionary", "save_png",
    "separate", "separation_layer", "solve", "solve_scale",
    "spatial_gradient", "ssim", "soft_threshold", "synthesize",
    "synthesize_mixture",
]
