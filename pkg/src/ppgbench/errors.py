"""Exception hierarchy shared across the pipeline."""


class PpgBenchError(Exception):
    """Base class for all pipeline errors."""


class FlatSegmentError(PpgBenchError):
    """Segment has zero variance and cannot be z-scored."""


class NoValidBeatsError(PpgBenchError):
    """No physiologically plausible peak-to-peak beat could be isolated."""


class InvalidSegmentError(PpgBenchError):
    """Segment fails the peak-count / IBI-count validity rules."""


class FormatError(PpgBenchError):
    """Malformed on-disk file (bad magic, truncation, bad row, ...)."""


class DegenerateLeverageError(PpgBenchError):
    """A leave-one-out leverage reached 1; the LOO residual is undefined."""


class LeakageError(PpgBenchError):
    """A subject appeared on both sides of a train/test split."""
