from .errors import (
    AuditError,
    ConfigurationError,
    ContractError,
    CoordinateError,
    DataError,
    DegenerateDatasetError,
    DimensionError,
    DivergenceError,
    EmptyDatasetError,
    NumericError,
    ParseError,
    at_window,
)
from .seeding import derive_rng, derive_seed

__all__ = [
    "AuditError",
    "ConfigurationError",
    "ContractError",
    "CoordinateError",
    "DataError",
    "DegenerateDatasetError",
    "DimensionError",
    "DivergenceError",
    "EmptyDatasetError",
    "NumericError",
    "ParseError",
    "at_window",
    "derive_rng",
    "derive_seed",
]
