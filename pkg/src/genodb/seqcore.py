"""Domain types for short-read data: bases, qualities, keys and entities.

Sequences are plain ``str`` over the alphabet ``ACGTN`` (always uppercase
once they are inside the library).  Quality vectors are ``bytes`` holding
raw Phred scores (0..93), i.e. ``list(read.qual)`` gives the integer scores.
On disk the scores are written as ASCII with offset 33 (Sanger FASTQ).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

BASES = "ACGTN"
CALLABLE_BASES = "ACGT"
MAX_PHRED = 93
PHRED_OFFSET = 33
MAX_LANE = 8

_COMPLEMENT = str.maketrans("ACGTN", "TGCAN")
_ILLEGAL = re.compile(r"[^ACGTN]")


class Strand(str, enum.Enum):
    FORWARD = "+"
    REVERSE = "-"


@dataclass(frozen=True, slots=True, order=True)
class SampleKey:
    """Composite key (experiment, sample group, sample) of one sample."""

    experiment_id: int
    sample_group_id: int
    sample_id: int

    def __post_init__(self):
        for name in ("experiment_id", "sample_group_id", "sample_id"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    def __str__(self):
        return f"{self.experiment_id}/{self.sample_group_id}/{self.sample_id}"

    @classmethod
    def parse(cls, text: str) -> "SampleKey":
        """Parse ``"E/G/S"`` into a key."""
        parts = text.split("/")
        if len(parts) != 3:
            raise ValueError(f"sample key must look like E/G/S, got {text!r}")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True, slots=True)
class ReadCoordinates:
    """Where on the flowcell a read was located."""

    instrument: str
    flowcell: str
    lane: int
    tile: int
    x: int
    y: int

    def name(self) -> str:
        return f"{self.instrument}:{self.flowcell}:{self.lane}:{self.tile}:{self.x}:{self.y}"


def parse_read_name(name: str) -> ReadCoordinates:
    """Decompose an Illumina-style read name into coordinates.

    Two layouts are understood::

        INSTRUMENT:FLOWCELL:LANE:TILE:X:Y      (instrument may contain ':')
        INSTRUMENT_FLOWCELL:LANE:TILE:X:Y      (older Solexa pipeline names)

    Anything after the first whitespace, a ``#index`` or a ``/1`` mate
    suffix is dropped.  Raises ``ValueError`` for names that do not carry
    coordinates.
    """
    core = name.split(None, 1)[0] if name else ""
    core = core.split("#", 1)[0]
    if len(core) > 2 and core[-2] == "/" and core[-1] in "12":
        core = core[:-2]
    parts = core.split(":")
    if len(parts) >= 6:
        instrument = ":".join(parts[:-5])
        flowcell = parts[-5]
    elif len(parts) == 5:
        instrument, _, flowcell = parts[0].rpartition("_")
        if not instrument:
            instrument, flowcell = flowcell, ""
    else:
        raise ValueError(f"read name {name!r} does not carry flowcell coordinates")
    try:
        lane, tile, x, y = (int(p) for p in parts[-4:])
    except ValueError:
        raise ValueError(f"read name {name!r} has non-numeric coordinates") from None
    return ReadCoordinates(instrument, flowcell, lane, tile, x, y)


@dataclass(frozen=True, slots=True)
class ShortRead:
    read_id: int
    sample: SampleKey
    coords: ReadCoordinates
    seq: str
    qual: bytes


@dataclass(frozen=True, slots=True)
class Tag:
    """A distinct read sequence of one sample with its frequency and rank."""

    tag_id: int
    sample: SampleKey
    seq: str
    frequency: int
    rank: int


@dataclass(frozen=True, slots=True)
class ReferenceSequence:
    ref_id: int
    name: str
    seq: str

    def __len__(self):
        return len(self.seq)


@dataclass(frozen=True, slots=True)
class Alignment:
    """Gapless placement of a tag or read on a reference.

    ``gene_id`` is the ``ref_id`` of the reference hit; ``pos`` is 1-based.
    ``target_kind`` says whether ``target_id`` names a tag or a read.
    """

    alignment_id: int
    sample: SampleKey
    target_id: int
    gene_id: int
    pos: int
    strand: Strand = Strand.FORWARD
    target_kind: str = "tag"


@dataclass(frozen=True, slots=True)
class GeneExpression:
    gene_id: int
    sample: SampleKey
    total_frequency: int
    tag_count: int


@dataclass(frozen=True, slots=True)
class ConsensusSequence:
    ref_id: int
    seq: str

    def __len__(self):
        return len(self.seq)


def normalize_sequence(text: str) -> str:
    return text.upper()


def illegal_symbols(seq: str) -> list[str]:
    """Distinct symbols in ``seq`` outside ``ACGTN``, in order of appearance."""
    if _ILLEGAL.search(seq) is None:
        return []
    return list(dict.fromkeys(_ILLEGAL.findall(seq)))


def contains_n(seq: str) -> bool:
    return "N" in seq


def reverse_complement(seq: str) -> str:
    return seq.translate(_COMPLEMENT)[::-1]


def validate_read(read: ShortRead) -> list[str]:
    """Return every rule the read breaks; an empty list means it is valid."""
    violations = []
    for sym in illegal_symbols(read.seq):
        violations.append(f"illegal symbol {sym}")
    if len(read.seq) != len(read.qual):
        violations.append(
            f"length mismatch: sequence has {len(read.seq)} bases, "
            f"quality has {len(read.qual)} scores"
        )
    bad_scores = []
    if read.qual and max(read.qual) > MAX_PHRED:
        bad_scores = sorted({q for q in read.qual if q > MAX_PHRED})
    if bad_scores:
        violations.append(f"quality scores out of range 0..{MAX_PHRED}: {bad_scores}")
    coords = read.coords
    if not 1 <= coords.lane <= MAX_LANE:
        violations.append(f"lane {coords.lane} outside 1..{MAX_LANE}")
    if coords.tile < 1:
        violations.append(f"tile {coords.tile} must be >= 1")
    if coords.x < 0 or coords.y < 0:
        violations.append(f"negative tile coordinates ({coords.x}, {coords.y})")
    return violations
