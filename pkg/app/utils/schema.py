import pyarrow as pa

from utils.errors import ParameterError
from utils.logger import get_logger

logger = get_logger()

# Column kinds used by the output tables
_KIND_TO_PYARROW = {
    "time": pa.int64(),
    "count": pa.int64(),
    "seed": pa.uint64(),
    "real": pa.float64(),
    "flag": pa.bool_(),
}

RELIABILITY_SCHEMA = pa.schema(
    [
        ("d", pa.int64()),
        ("count", pa.int64()),
        ("freq", pa.float64()),
        ("log2freq", pa.float64()),
    ]
)

RELIABILITY_CI_SCHEMA = pa.schema(
    [("d", pa.int64()), ("ci_low", pa.float64()), ("ci_high", pa.float64())]
)

DELAY_HISTOGRAM_SCHEMA = pa.schema([("d", pa.int64()), ("steps", pa.int64())])

SWEEP_SCHEMA = pa.schema([("code_seed", pa.uint64()), ("metric", pa.float64())])

CDF_SCHEMA = pa.schema([("threshold", pa.float64()), ("fraction", pa.float64())])

METRICS_SCHEMA = pa.schema(
    [
        ("trial", pa.int64()),
        ("sup_abs", pa.float64()),
        ("lqr", pa.float64()),
        ("desync_steps", pa.int64()),
        ("max_delay", pa.int64()),
    ]
)

THRESHOLD_SCHEMA = pa.schema(
    [
        ("formula", pa.string()),
        ("rate", pa.float64()),
        ("exponent", pa.float64()),
        ("n_rate", pa.float64()),
        ("n_exponent", pa.float64()),
        ("rate_bound", pa.float64()),
        ("k_min", pa.int64()),
    ]
)


def _map_kind_to_pyarrow_dtype(kind: str) -> pa.DataType:
    """
    Maps an output column kind to its PyArrow type.

    Args:
        kind: One of time, count, seed, real, flag.

    Returns:
        PyArrow data type.

    Raises:
        ParameterError: If the kind is not mapped.
    """
    dtype = _KIND_TO_PYARROW.get(kind)
    if dtype is None:
        logger.error(f"Unmapped column kind '{kind}' found.")
        raise ParameterError(f"unknown column kind '{kind}'; expected one of {sorted(_KIND_TO_PYARROW)}")
    return dtype


def trajectory_columns(m: int) -> dict[str, str]:
    """Column name -> kind for a trajectory of an m-dimensional plant."""
    columns = {"t": "time"}
    for prefix in ("x", "u", "xhat", "width"):
        columns.update({f"{prefix}_{i}": "real" for i in range(1, m + 1)})
    columns["d"] = "count"
    columns["desync"] = "flag"
    return columns


def build_pyarrow_schema(columns: dict[str, str]) -> pa.Schema:
    """
    Builds a PyArrow Schema from column kinds.

    Args:
        columns: A dictionary mapping column names to their kind.

    Returns:
        A PyArrow Schema with the columns in the given order.
    """
    return pa.schema(
        [(name, _map_kind_to_pyarrow_dtype(kind)) for name, kind in columns.items()]
    )


def build_trajectory_schema(m: int) -> pa.Schema:
    return build_pyarrow_schema(trajectory_columns(m))
