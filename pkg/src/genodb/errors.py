"""Exception hierarchy shared by every genodb module."""


class GenoDBError(Exception):
    """Base class for all errors raised by genodb."""


class DataError(GenoDBError, ValueError):
    """Input data violates a format or model rule."""


class FormatError(DataError):
    """A FASTQ/FASTA record is malformed.

    ``offset`` is the absolute byte offset in the source where the bad
    record starts (or the bad byte sits), ``ordinal`` the 1-based record
    number being parsed when the problem was found.
    """

    def __init__(self, message, offset=None, ordinal=None):
        self.offset = offset
        self.ordinal = ordinal
        where = []
        if ordinal is not None:
            where.append(f"record {ordinal}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class CapacityError(FormatError):
    """A single FASTQ record does not fit into the parser buffer."""

    def __init__(self, required, buffer_size, offset=None, ordinal=None):
        self.required = required
        self.buffer_size = buffer_size
        super().__init__(
            f"record needs a buffer of at least {required} bytes, "
            f"buffer_size is {buffer_size}",
            offset=offset,
            ordinal=ordinal,
        )


class ReferentialError(DataError):
    """A foreign reference does not resolve, or a key is duplicated."""


class SourceIOError(GenoDBError, OSError):
    """Reading a byte source failed."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
