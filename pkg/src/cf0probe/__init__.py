"""cf0probe: measure consonant-induced F0 perturbation in speech corpora.

The pipeline ingests forced-alignment TextGrids and audio (or precomputed
pitch contours), extracts onset-conditioned vowel F0 trajectories, and fits
penalized additive mixed models with AR(1) residuals to estimate difference
smooths between onset classes, stratified by lexical frequency or
training-set membership.
"""

__version__ = "0.1.0"

from .segments import OnsetClass, VowelHeight, VowelInfo, classify_onset, classify_vowel
from .annotations import (
    AnnotationDoc,
    FrequencyTable,
    IntervalTier,
    PronDict,
    parse_frequency_list,
    parse_pron_dict,
    parse_textgrid,
    serialize_textgrid,
)
from .pitch import (
    PitchConfig,
    PitchContour,
    SpeakerRange,
    extract_f0,
    speaker_range,
    two_pass_extract,
)
from .tokens import (
    ExclusionReason,
    ExclusionReport,
    VowelToken,
    apply_exclusions,
    find_candidates,
    time_normalize,
    zscore_by_speaker,
)
from .strata import (
    OverlapReport,
    StrataConfig,
    balanced_sample,
    compute_overlap,
    label_seen_unseen,
    split_by_frequency,
)
from .probe import (
    DifferenceCurve,
    ProbeMode,
    ProbeReport,
    build_probe_spec,
    difference_smooth,
    run_probe,
)
from .synth import SynthSpec, generate_tokens, synth_wave_corpus

__all__ = [
    "__version__",
    "OnsetClass", "VowelHeight", "VowelInfo", "classify_onset", "classify_vowel",
    "AnnotationDoc", "FrequencyTable", "IntervalTier", "PronDict",
    "parse_frequency_list", "parse_pron_dict", "parse_textgrid", "serialize_textgrid",
    "PitchConfig", "PitchContour", "SpeakerRange",
    "extract_f0", "speaker_range", "two_pass_extract",
    "ExclusionReason", "ExclusionReport", "VowelToken",
    "apply_exclusions", "find_candidates", "time_normalize", "zscore_by_speaker",
    "OverlapReport", "StrataConfig",
    "balanced_sample", "compute_overlap", "label_seen_unseen", "split_by_frequency",
    "DifferenceCurve", "ProbeMode", "ProbeReport",
    "build_probe_spec", "difference_smooth", "run_probe",
    "SynthSpec", "generate_tokens", "synth_wave_corpus",
]
