import math
import os

import numpy as np


def convert_numpy_types(obj):
    """Convert numpy types (and tuples) to native Python types for JSON serialization"""

    if isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, (np.floating, float)):
        return _finite_or_none(float(obj))
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, np.ndarray):
        return convert_numpy_types(obj.tolist())
    elif isinstance(obj, dict):
        return {key: convert_numpy_types(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_numpy_types(item) for item in obj]
    return obj


def _finite_or_none(x: float):
    # JSON has no inf/nan
    return x if math.isfinite(x) else None


def default_workers() -> int:
    """Thread count from CDFTRANSFORM_WORKERS (default 1)."""
    return max(1, int(os.environ.get('CDFTRANSFORM_WORKERS', 1)))
