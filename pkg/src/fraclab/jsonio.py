"""Canonical JSON: sorted keys, floats rounded to 12 significant digits."""

import json
import math

import numpy as np

SIG_DIGITS = 12


def canonical(obj):
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        x = float(format(x, f".{SIG_DIGITS}g"))
        return 0.0 if x == 0 else x
    return obj


def dumps(obj, indent=2) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=indent) + "\n"
