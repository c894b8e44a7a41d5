"""Speech-encoder feature extraction for the awekws toolkit."""

from .bridge import (
    AudioEntry,
    ExtractionJob,
    SpeechEncoder,
    extract,
    extract_all_layers,
    load_encoder,
    read_audio_manifest,
    read_wav,
    to_frame_span,
)
from .errors import AudioDecodeFailure, BridgeError, LayerOutOfRange, ModelLoadFailure

__version__ = "0.1.0"
