"""Exception hierarchy shared by every ifsketch module."""


class IFSError(Exception):
    """Base class for all ifsketch errors."""


class IndexOutOfRange(IFSError, IndexError):
    """An itemset references a column outside the database."""


class FormatError(IFSError, ValueError):
    """A serialized database, sketch or manifest is malformed."""


class ParamError(IFSError, ValueError):
    """Construction parameters violate an integrality or range constraint."""


class DimensionError(ParamError):
    """A permutation or row has the wrong size for the requested layout."""


class WrongKind(IFSError, TypeError):
    """A query was routed to a sketch of the other kind."""


class ArityMismatch(IFSError, ValueError):
    """The queried itemset size differs from the sketch's k."""


class UnsupportedArity(IFSError, ValueError):
    """The sketch kind cannot be built for the requested k."""


class DecodeAmbiguous(IFSError):
    """The oracle did not single out exactly one partner for a source index.

    ``where`` is ``(i,)`` for the constant-epsilon decoder and ``(k, l, i)``
    for the block decoder.
    """

    def __init__(self, *where: int, candidates: tuple[int, ...] = ()):
        self.where = where
        self.candidates = candidates
        loc = ",".join(map(str, where))
        super().__init__(f"DecodeAmbiguous({loc}): NO answers at {list(candidates)}")
