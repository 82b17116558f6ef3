"""Float encoding helpers for the JSON-based text artifacts."""
import math

import numpy as np


def encode_float(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def encode_floats(arr):
    return [encode_float(v) for v in np.asarray(arr, dtype=float).ravel()]


def decode_floats(values, shape=None):
    out = np.array([float(v) for v in values], dtype=float)
    if shape is not None:
        out = out.reshape(shape)
    return out


def encode_matrix(M):
    return [encode_floats(row) for row in np.asarray(M, dtype=float)]


def decode_matrix(rows, ncols):
    if len(rows) == 0:
        return np.zeros((0, ncols))
    return np.array([[float(v) for v in r] for r in rows], dtype=float)
