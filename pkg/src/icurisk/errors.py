"""Exception types raised across the pipeline.

Every stage failure maps to one of these so the CLI can report the stage
and the reason without tracebacks for expected data problems.
"""


class PipelineError(Exception):
    """Base class for all toolkit errors."""


# --- ingest ---------------------------------------------------------------

class MissingColumn(PipelineError):
    pass


class UnknownColumn(PipelineError):
    pass


class ParseError(PipelineError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyFile(PipelineError):
    pass


class InvalidTimestamp(PipelineError):
    pass


# --- preprocessing --------------------------------------------------------

class InsufficientDonors(PipelineError):
    pass


class ConstantColumn(PipelineError):
    pass


class OutOfPhysiologicRange(PipelineError):
    pass


# --- selection ------------------------------------------------------------

class SingleClass(PipelineError):
    pass


class KExceedsDimensions(PipelineError):
    pass


class SingularDesign(PipelineError):
    pass


# --- resampling -----------------------------------------------------------

class TooFewInstances(PipelineError):
    pass


# --- modeling -------------------------------------------------------------

class NonConvergence(PipelineError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NoEvents(PipelineError):
    pass


class MissingFeature(PipelineError):
    pass


# --- evaluation -----------------------------------------------------------

class NoPositives(PipelineError):
    pass


class NoComparablePairs(PipelineError):
    pass


class DegenerateSample(PipelineError):
    pass


# --- nomogram / export ----------------------------------------------------

class DegenerateRange(PipelineError):
    pass


class IncompleteBundle(PipelineError):
    pass


# --- configuration --------------------------------------------------------

class ConfigError(PipelineError):
    pass
