"""Exception hierarchy shared by every pipeline module.

Each error carries a short machine-readable ``code`` so callers (the CLI in
particular) can report a reason without parsing messages.
"""


class EdgePedError(ValueError):
    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


class FormatError(EdgePedError):
    code = "format"


class TruncationError(EdgePedError):
    code = "truncated"


class UnsupportedFormatError(EdgePedError):
    code = "unsupported"


class DuplicateFrameError(EdgePedError):
    code = "duplicate"


class SchemaError(EdgePedError):
    code = "schema"


class BitstreamError(EdgePedError):
    code = "bitstream"


class ShapeError(EdgePedError):
    code = "shape"


class EmptyInputError(EdgePedError):
    code = "empty"


class DomainError(EdgePedError):
    code = "domain"


class ContractError(EdgePedError):
    code = "contract"


class InfeasibleError(EdgePedError):
    code = "infeasible"


class ConfigError(EdgePedError):
    code = "config"


class CoverageError(EdgePedError):
    code = "coverage"
