"""Deep-fake portrait video detection from eye and gaze behavior.

Pipeline: per-frame track records -> visual + geometric features ->
temporal/spectral/metric signals -> 40 x omega x 3 signatures -> dense
classifier -> per-video verdicts.
"""

from .trackio import EyeState, Track, TrackRecord, parse_track, write_track
from .geometry import GeoFrame, VergenceSolution, geo_frame, intersect_gaze_rays
from .visual import LabColor, VisualFrame, srgb_to_lab, visual_frame
from .signals import SequenceWindow, psd, slice_sequences, ss_normalize, xcorr
from .signature import Signature, build_signature, read_signatures, write_signatures
from .network import (
    ModelState,
    TrainConfig,
    forward,
    gradient_check,
    load_model,
    predict_sequence,
    save_model,
    train,
)
from .verdict import VideoVerdict, aggregate
from .synth import FakePerturbation, SynthConfig, gen_fake_track, gen_real_track

__version__ = "0.1.0"
