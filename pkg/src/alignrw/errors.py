"""Exception hierarchy shared by every alignrw module."""

from __future__ import annotations


class AlignRWError(Exception):
    """Base class for all errors raised by alignrw."""


class ExpressionSyntaxError(AlignRWError, ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class SideError(AlignRWError, ValueError):
    """An expression or correspondence mixes source and target vocabulary."""


class AlignmentError(AlignRWError):
    def __init__(self, message: str, line: int | None = None, entry: int | None = None):
        self.line = line
        self.entry = entry
        where = []
        if line is not None:
            where.append(f"line {line}")
        if entry is not None:
            where.append(f"correspondence #{entry}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class QuerySyntaxError(AlignRWError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class RewriteError(AlignRWError):
    pass


class UnmappedVocabularyError(RewriteError):
    def __init__(self, iris):
        self.iris = sorted(iris)
        super().__init__("no correspondence for source IRIs: " + ", ".join(self.iris))


class KeyNotFoundError(AlignRWError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "key not found"


class EmptyQuestionError(AlignRWError, ValueError):
    pass


class NoConfidentMatch(AlignRWError):
    def __init__(self, threshold: float, candidates):
        self.threshold = threshold
        self.candidates = list(candidates)
        listing = "; ".join(f"{key} ({score:.3f})" for key, score in self.candidates)
        super().__init__(f"no confident match at threshold {threshold}; top candidates: {listing or 'none'}")


class FactsError(AlignRWError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
