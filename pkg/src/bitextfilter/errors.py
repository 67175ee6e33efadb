"""Exception hierarchy.

Contract violations derive from :class:`BitextError` (a ``ValueError``) and
map to CLI exit code 2; I/O failures stay ``OSError`` and map to exit code 1.
"""


class BitextError(ValueError):
    """Input violates a data or usage contract."""


class CorpusFormatError(BitextError):
    def __init__(self, message: str, line: int, offset: int):
        super().__init__(f"line {line} (byte {offset}): {message}")
        self.line = line
        self.offset = offset


class CorpusWriteError(OSError):
    def __init__(self, message: str, bytes_written: int):
        super().__init__(f"{message} (after {bytes_written} bytes written)")
        self.bytes_written = bytes_written


class ScoreFileError(BitextError):
    pass


class CoverageError(BitextError):
    """Scores or decisions do not cover the expected id universe."""

    def __init__(self, message: str, ids=()):
        ids = list(ids)[:10]
        if ids:
            message = f"{message}: {', '.join(map(str, ids))}"
        super().__init__(message)
        self.ids = ids
