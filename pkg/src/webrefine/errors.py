"""Exception types shared across the pipeline stages."""


class WebrefineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WebrefineError):
    """Invalid or unknown configuration keys/values."""


class ChainBroken(WebrefineError):
    """Consecutive stage statistics do not chain (docs_in != previous docs_out)."""


class SinkError(WebrefineError):
    """Writing records to a sink failed."""


class MalformedRecord(WebrefineError):
    def __init__(self, line_number, message="malformed record"):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class Truncated(WebrefineError):
    """Record file ends mid-line (missing terminator)."""


class BadMagic(WebrefineError):
    def __init__(self, offset, message="missing WARC/ version line"):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class TruncatedRecord(WebrefineError):
    def __init__(self, offset, message="stream ended mid-record"):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class GzipError(WebrefineError):
    def __init__(self, offset, message="bad gzip member"):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class UnparsableUrl(WebrefineError):
    """URL could not be normalized."""


class EmptyText(WebrefineError):
    """Operation requires nonempty text."""


class EmptyShingleSet(WebrefineError):
    """MinHash signature requires at least one shingle."""


class ParamMismatch(WebrefineError):
    """MinHash signatures built with different parameters cannot be compared."""


class DomainError(WebrefineError):
    """Numeric argument outside its valid range."""


class InvalidSpans(WebrefineError):
    """Character spans overlap or fall outside the document."""


class RegistryUnavailable(WebrefineError):
    """Kept-URL registry could not be read."""
