"""Exception hierarchy shared across the pipeline.

Grouped by stage so the CLI can map whole families to exit codes:
data/config problems exit 2, backend (LLM transport) problems exit 3.
"""


class CascError(Exception):
    """Base class for every error raised by this package."""


# --- corpus / dataset ------------------------------------------------------

class CorpusError(CascError):
    pass


class MalformedLine(CorpusError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


class DuplicateId(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id: {doc_id!r}")
        self.doc_id = doc_id


class EmptyText(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"document {doc_id!r} has empty text")
        self.doc_id = doc_id


class MissingAnswers(CorpusError):
    def __init__(self, question_id: str):
        super().__init__(f"question {question_id!r} has no gold answers")
        self.question_id = question_id


# --- retrieval -------------------------------------------------------------

class EmptyCorpus(CascError):
    def __init__(self, detail: str = "corpus contains no documents"):
        super().__init__(detail)


class UnknownDoc(CascError):
    def __init__(self, doc_id: str):
        super().__init__(f"document id not in index: {doc_id!r}")
        self.doc_id = doc_id


# --- extraction ------------------------------------------------------------

class BackendFailure(CascError):
    """LLM extraction backend failed (transport or unusable output)."""

    def __init__(self, detail: str, doc_id: str | None = None):
        msg = f"doc {doc_id!r}: {detail}" if doc_id else detail
        super().__init__(msg)
        self.detail = detail
        self.doc_id = doc_id


class UnparseableOutput(CascError):
    def __init__(self, detail: str = "no JSON array found in model output"):
        super().__init__(detail)


# --- synthesis -------------------------------------------------------------

class BudgetTooSmall(CascError):
    def __init__(self, budget: int, needed: int):
        super().__init__(
            f"token budget {budget} cannot fit section headers plus one line"
            f" (minimum here: {needed})"
        )
        self.budget = budget
        self.needed = needed


# --- LLM gateway -----------------------------------------------------------

class GatewayError(CascError):
    pass


class Timeout(GatewayError):
    def __init__(self, detail: str = "request timed out"):
        super().__init__(detail)


class HttpStatus(GatewayError):
    def __init__(self, code: int, detail: str = ""):
        super().__init__(f"HTTP {code}" + (f": {detail}" if detail else ""))
        self.code = code


class MalformedResponse(GatewayError):
    def __init__(self, detail: str = "response missing choices[0].message.content"):
        super().__init__(detail)


class RetriesExhausted(GatewayError):
    def __init__(self, attempts: int, last_error: str):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts


class MockScriptMiss(GatewayError):
    """Mock backend received a request whose hash is not in the script file."""

    def __init__(self, request_hash: str):
        super().__init__(f"no scripted response for request hash {request_hash}")
        self.request_hash = request_hash


# --- configuration ---------------------------------------------------------

class ConfigError(CascError):
    pass


class ConfigParse(ConfigError):
    def __init__(self, detail: str):
        super().__init__(detail)


class ConfigInvalid(ConfigError):
    def __init__(self, field: str, detail: str = ""):
        super().__init__(f"invalid config field {field!r}" + (f": {detail}" if detail else ""))
        self.field = field
