"""Exception hierarchy for the extraction bridge; each maps to a CLI exit code.

Corpus-side problems (missing files, malformed manifests) reuse the awekws
error types and their exit codes.
"""


class BridgeError(Exception):
    """Base class for all bridge errors."""

    exit_code = 1


class ModelLoadFailure(BridgeError):
    exit_code = 5


class AudioDecodeFailure(BridgeError):
    exit_code = 6


class LayerOutOfRange(BridgeError):
    exit_code = 7
