from enum import Enum
from typing import Any, Dict, Optional


class ErrorCategory(str, Enum):
    USAGE = "usage"
    DATA = "data"
    NUMERIC = "numeric"


class ErrorCode(str, Enum):
    # panel data
    UNBALANCED = "UNBALANCED"
    NO_TREATED = "NO_TREATED"
    NO_CONTROL = "NO_CONTROL"
    BAD_TSTAR = "BAD_TSTAR"
    EMPTY_WINDOW = "EMPTY_WINDOW"
    BAD_WINDOW = "BAD_WINDOW"
    PARSE_ERROR = "PARSE_ERROR"
    SCHEMA_ERROR = "SCHEMA_ERROR"
    DATA_NOT_FOUND = "DATA_NOT_FOUND"
    EMPTY_CELL = "EMPTY_CELL"
    IO_ERROR = "IO_ERROR"
    # generators
    BAD_RHO = "BAD_RHO"
    BAD_SPEC = "BAD_SPEC"
    ODD_ARM = "ODD_ARM"
    # estimators
    STAGGERED_UNSUPPORTED = "STAGGERED_UNSUPPORTED"
    NO_COMPARISON_GROUP = "NO_COMPARISON_GROUP"
    HORIZON_UNAVAILABLE = "HORIZON_UNAVAILABLE"
    POST_PERIOD_IN_PRETEST = "POST_PERIOD_IN_PRETEST"
    # variance / analytics
    TOO_FEW_CLUSTERS = "TOO_FEW_CLUSTERS"
    BAD_T = "BAD_T"
    DIM_MISMATCH = "DIM_MISMATCH"
    ZERO_NOISE = "ZERO_NOISE"
    TOO_FEW_BLOCKS = "TOO_FEW_BLOCKS"
    NO_BRACKET = "NO_BRACKET"
    BAD_COV = "BAD_COV"
    # experiments
    NO_CELLS = "NO_CELLS"
    REPLICATION_FAILED = "REPLICATION_FAILED"
    INVALID_CONFIG = "INVALID_CONFIG"
    UNKNOWN_PRESET = "UNKNOWN_PRESET"


_CATEGORY = {
    ErrorCode.INVALID_CONFIG: ErrorCategory.USAGE,
    ErrorCode.UNKNOWN_PRESET: ErrorCategory.USAGE,
    ErrorCode.BAD_WINDOW: ErrorCategory.USAGE,
    ErrorCode.EMPTY_WINDOW: ErrorCategory.USAGE,
    ErrorCode.BAD_RHO: ErrorCategory.USAGE,
    ErrorCode.BAD_SPEC: ErrorCategory.USAGE,
    ErrorCode.BAD_T: ErrorCategory.USAGE,
    ErrorCode.DIM_MISMATCH: ErrorCategory.USAGE,
    ErrorCode.BAD_COV: ErrorCategory.USAGE,
    ErrorCode.ZERO_NOISE: ErrorCategory.NUMERIC,
    ErrorCode.NO_BRACKET: ErrorCategory.NUMERIC,
    ErrorCode.TOO_FEW_CLUSTERS: ErrorCategory.NUMERIC,
    ErrorCode.TOO_FEW_BLOCKS: ErrorCategory.NUMERIC,
    ErrorCode.REPLICATION_FAILED: ErrorCategory.NUMERIC,
}

EXIT_CODES = {
    ErrorCategory.USAGE: 1,
    ErrorCategory.DATA: 2,
    ErrorCategory.NUMERIC: 3,
}

HTTP_STATUS = {
    ErrorCategory.USAGE: 400,
    ErrorCategory.DATA: 422,
    ErrorCategory.NUMERIC: 500,
}


class LabError(Exception):
    """Error raised by every layer of the lab, tagged with a machine-readable code."""

    def __init__(self, code: ErrorCode, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.code = ErrorCode(code)
        self.message = message
        self.details = details or {}

    @property
    def category(self) -> ErrorCategory:
        return _CATEGORY.get(self.code, ErrorCategory.DATA)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.category]

    @property
    def http_status(self) -> int:
        return HTTP_STATUS[self.category]

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code.value, "error": self.message, "details": self.details}

    def __str__(self) -> str:
        return f"{self.code.value}: {self.message}"

    def __reduce__(self):
        return (self.__class__, (self.code, self.message, self.details))
