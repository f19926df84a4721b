"""Normalized sequence store, sequence codecs and storage accounting."""

from .codecs import (
    EncodedSequence,
    decode_blockdict,
    decode_packed2bit,
    decode_sequence,
    encode_blockdict,
    encode_packed2bit,
    encode_sequence,
    encode_text,
    packed_size,
)
from .layout import BlobEntry, Flowcell, LaneRun, RawRead
from .report import Corpus, StorageReport, import_corpus, load_corpus, storage_report
from .store import Store, read_alignment_tsv

__all__ = [
    "BlobEntry", "Corpus", "EncodedSequence", "Flowcell", "LaneRun", "RawRead",
    "StorageReport", "Store", "decode_blockdict", "decode_packed2bit", "decode_sequence",
    "encode_blockdict", "encode_packed2bit", "encode_sequence", "encode_text",
    "import_corpus", "load_corpus", "packed_size", "read_alignment_tsv", "storage_report",
]
