"""Phase retrieval from single inline-holographic intensity images.

Library layout:

- ``optics``: angular-spectrum transfer function and propagation
- ``priors``: TV denoising, display scaling, deep-denoiser prior chain
- ``zsnd``: wire-protocol client for out-of-process denoisers
- ``solvers``: error-reduction / HIO physics block, baselines, orchestrator
- ``simulate``: phantoms, forward diffraction, Poisson shot noise
- ``metrics``: SSIM / PSNR and the fixed phase display scaling
- ``fileio``, ``config``, ``benchmark``, ``plotting``, ``cli``: persistence,
  configuration, and the command-line frontend
"""

from .optics import (
    FrequencyGrid,
    OpticalConfig,
    SamplingReport,
    TransferFunction,
    build_otf,
    frequency_grid,
    propagate,
    validate_sampling,
)
from .priors import (
    DeepStage,
    IdentityStage,
    PriorChain,
    ScaleParams,
    TVStage,
    apply_prior_chain,
    scale_to_display,
    total_variation,
    tv_denoise,
    unscale,
    wrap_phase,
)
from .metrics import phase_image, psnr, ssim
from .simulate import (
    AmplitudePhaseMapping,
    NoiseModel,
    PoissonCheckReport,
    make_phantom,
    poisson_noise_check,
    simulate_diffraction,
    synthetic_cell,
)
from .solvers import (
    ConvergenceTrace,
    PriorPhase,
    ReconstructionError,
    ReconstructionResult,
    SolveSchedule,
    backpropagate_once,
    detect_stationary,
    gerchberg_saxton,
    hio_step,
    measured_amplitude,
    physics_fidelity_step,
    reconstruct,
    residual,
)
from .zsnd import (
    DenoiserClient,
    DenoiserError,
    DenoiserProtocolError,
    DenoiserServerError,
    DenoiserTransportError,
    EndpointSpec,
)

__version__ = "0.1.0"
