"""Exception hierarchy. Every error family maps to a documented CLI exit code."""


class AwekwsError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


# -- corpus / file errors (exit 3) ----------------------------------------

class MissingFile(AwekwsError):
    exit_code = 3


# -- data validation errors (exit 4) --------------------------------------

class DataError(AwekwsError):
    exit_code = 4


class InvalidManifest(DataError):
    pass


class DimensionMismatch(DataError):
    """Feature file byte length disagrees with the declared n_frames * dim."""


class InconsistentFeatureDim(DataError):
    """Feature dimension varies between utterances of one corpus."""


class NonFiniteValue(DataError):
    pass


class AlignmentOutOfRange(DataError):
    pass


class EmptyScopeGroup(DataError):
    """A normalization group (utterance or speaker) holds no frames."""


# -- pairing / training errors (exit 5) ------------------------------------

class TrainingError(AwekwsError):
    exit_code = 5


class NoPositivePairsAvailable(TrainingError):
    pass


class OddPairCountRequested(TrainingError):
    pass


class NonFiniteLoss(TrainingError):
    pass


class ZeroNormEmbedding(TrainingError):
    pass


class NoSameLabelPairs(TrainingError):
    pass


# -- numerical / shape errors (exit 6) -------------------------------------

class ComputeError(AwekwsError):
    exit_code = 6


class ShapeMismatch(ComputeError):
    pass


class DimMismatch(ComputeError):
    pass


class EmptySequence(ComputeError):
    pass


class InvalidLength(ComputeError):
    pass


class ZeroNormFrame(ComputeError):
    pass


class NonFiniteGradient(ComputeError):
    pass


# -- evaluation errors (exit 7) ---------------------------------------------

class EvaluationError(AwekwsError):
    exit_code = 7


class NoRelevantUtterances(EvaluationError):
    pass


class NoKeywordsSurviveFilter(EvaluationError):
    pass


# -- layer sweep (exit 8) ----------------------------------------------------

class LayerSetInconsistent(AwekwsError):
    exit_code = 8
