"""Shape descriptors for event cameras.

Event streams are framed into fixed-count windows; every event gets a
quantized local direction from a spatio-temporal plane fit, and windows are
described by histograms of oriented events (HOE) or event shape contexts
(ESC), optionally weighted by rotation-invariant local binary patterns.
Descriptors feed an unsupervised Gaussian model or a one-against-one SVM.
"""
from .aedat import AedatError, parse_aedat, read_aedat, save_aedat, write_aedat
from .descriptors import RingConfig, esc, esc_event, hoe, hoe_elbp
from .elbp import canonicalize, code_window, raw_pattern, weight_of
from .events import (Event, EventStream, EventWindow, FramingConfig, accumulate_direction,
                     accumulate_polarity, frame_stream, spatial_bounding_box)
from .orientation import OrientationConfig, fit_plane, orient_window, quantize_direction
from .pipeline import EvalReport, FeatureSet, PipelineConfig

__version__ = "0.1.0"

__all__ = [
    "AedatError", "parse_aedat", "read_aedat", "save_aedat", "write_aedat",
    "RingConfig", "esc", "esc_event", "hoe", "hoe_elbp",
    "canonicalize", "code_window", "raw_pattern", "weight_of",
    "Event", "EventStream", "EventWindow", "FramingConfig", "accumulate_direction",
    "accumulate_polarity", "frame_stream", "spatial_bounding_box",
    "OrientationConfig", "fit_plane", "orient_window", "quantize_direction",
    "EvalReport", "FeatureSet", "PipelineConfig",
]
