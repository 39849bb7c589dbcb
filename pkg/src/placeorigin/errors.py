"""Exception hierarchy shared by all pipeline stages."""


class PlaceOriginError(Exception):
    """Base class for every error raised by this package."""


class EmptyRoot(PlaceOriginError, ValueError):
    pass


class MissingContext(PlaceOriginError, ValueError):
    pass


class MalformedRow(PlaceOriginError, ValueError):
    def __init__(self, row_index, message):
        self.row_index = row_index
        super().__init__(f"row {row_index}: {message}")


class BadCoordinate(PlaceOriginError, ValueError):
    pass


class RatioInfeasible(PlaceOriginError):
    pass


class EmptyName(PlaceOriginError, ValueError):
    pass


class EndpointError(PlaceOriginError):
    pass


class HttpError(EndpointError):
    def __init__(self, message, status=None, attempts=0):
        self.status = status
        self.attempts = attempts
        super().__init__(message)


class MalformedResponse(EndpointError):
    pass


class ContextOverflow(PlaceOriginError):
    pass


class EmptyResult(PlaceOriginError):
    pass


class NotCached(PlaceOriginError, LookupError):
    pass


class CorruptSnapshot(PlaceOriginError):
    pass


class EncoderFailure(PlaceOriginError):
    def __init__(self, message, doc_id=None):
        self.doc_id = doc_id
        super().__init__(message if doc_id is None else f"{doc_id}: {message}")


class DimensionMismatch(PlaceOriginError, ValueError):
    pass


class EmptyEmbedding(PlaceOriginError, ValueError):
    pass


class BudgetUnsatisfiable(PlaceOriginError):
    pass


class MissingJudgment(PlaceOriginError, KeyError):
    def __init__(self, query_id, item_id):
        self.query_id = query_id
        self.item_id = item_id
        super().__init__(f"no judgment for query {query_id!r}, item {item_id!r}")

    def __str__(self):
        return self.args[0]


class InvalidJudgment(PlaceOriginError, ValueError):
    pass


class UndefinedBase(PlaceOriginError, ZeroDivisionError):
    pass


class ConfigError(PlaceOriginError, ValueError):
    pass
