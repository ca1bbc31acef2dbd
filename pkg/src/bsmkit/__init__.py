"""bsmkit — binaural signal matching for arbitrary microphone arrays.

Design per-frequency filter weights that combine microphone signals into
a two-ear binaural estimate, evaluate the result against HRTF references
(complex/magnitude/mixed matching errors, ILD, ITD, null-space limits),
and render audio. See the README for the CLI front end.
"""

from .core import (
    ArrayGeometry,
    BsmError,
    Direction,
    DirectionGrid,
    FrequencyAxis,
    HrtfSet,
    IncompatibleDatasets,
    NoiseModel,
    PLANE_WAVE,
    SPEED_OF_SOUND,
    SteeringSet,
    angular_distance,
    glasses_array,
    nearest_direction,
    ring_grid,
)
from .design import (
    AlphaSchedule,
    BsmFilterBank,
    FovSpec,
    NoConvergence,
    SingularSystem,
    alpha_weight,
    apply_fov,
    design_ls,
    design_magls,
    design_mixed,
    fov_weights,
    in_fov_mask,
)
from .io import (
    ChecksumMismatch,
    DimsMismatch,
    SchemaUnknown,
    export_report_csv,
    load_dataset,
    save_dataset,
)
from .lebedev import lebedev_2702
from .metrics import (
    AllBinsExcluded,
    DirectionRow,
    ErbFilterBank,
    MetricsReport,
    SilentChannel,
    ZeroReference,
    eps_ls,
    eps_magls,
    eps_mixed,
    ild,
    ild_error,
    itd,
    itd_error,
    make_erb_filterbank,
    null_space_projection,
)
from .scene import (
    BadFrameConfig,
    BinauralSignal,
    Source,
    SourceSet,
    apply_filter,
    ground_truth_binaural,
    read_wav,
    render_time_domain,
    rotate_hrtf,
    synthesize_mic_signals,
    write_wav,
)
from .steering import (
    SourceInsideArray,
    gen_free_field_hrtf,
    gen_plane_wave_steering,
    gen_point_source_steering,
    validate_steering,
)

__version__ = "0.1.0"

__all__ = [
    "AllBinsExcluded", "AlphaSchedule", "ArrayGeometry", "BadFrameConfig",
    "BinauralSignal", "BsmError", "BsmFilterBank", "ChecksumMismatch",
    "DimsMismatch", "Direction", "DirectionGrid", "DirectionRow",
    "ErbFilterBank", "FovSpec", "FrequencyAxis", "HrtfSet",
    "IncompatibleDatasets", "MetricsReport", "NoConvergence", "NoiseModel",
    "PLANE_WAVE", "SPEED_OF_SOUND", "SchemaUnknown", "SilentChannel",
    "SingularSystem", "Source", "SourceInsideArray", "SourceSet",
    "SteeringSet", "ZeroReference", "alpha_weight", "angular_distance",
    "apply_filter", "apply_fov", "design_ls", "design_magls", "design_mixed",
    "eps_ls", "eps_magls", "eps_mixed", "export_report_csv", "fov_weights",
    "gen_free_field_hrtf", "gen_plane_wave_steering",
    "gen_point_source_steering", "glasses_array", "ground_truth_binaural",
    "ild", "ild_error", "in_fov_mask", "itd", "itd_error", "lebedev_2702",
    "load_dataset", "make_erb_filterbank", "nearest_direction",
    "null_space_projection", "read_wav", "render_time_domain", "ring_grid",
    "rotate_hrtf", "save_dataset", "synthesize_mic_signals",
    "validate_steering", "write_wav",
]
