"""Itemset-frequency-indicator sketches and the permutation-encoding hard
instances that force them to be large."""

from .dataset import Database, Frequency, Itemset, frequency, read_db, write_db
from .errors import (
    ArityMismatch,
    DecodeAmbiguous,
    DimensionError,
    FormatError,
    IFSError,
    IndexOutOfRange,
    ParamError,
    UnsupportedArity,
    WrongKind,
)
from .lowerbound import (
    ConstInstance,
    GapReport,
    GeneralInstance,
    Permutation,
    decode_const,
    decode_general,
    entropy_bits,
    gen_const_instance,
    gen_general_instance,
    make_row_const,
    make_row_general,
    theoretical_co_occurrence_probability,
    verify_gap,
)
from .sketch import (
    IndicatorAnswer,
    SketchBlob,
    SketchKind,
    SketchParams,
    build_exact_pairs,
    build_sampling,
    query_exact,
    query_sampling,
    sketch_size_bits,
)

__version__ = "0.1.0"
