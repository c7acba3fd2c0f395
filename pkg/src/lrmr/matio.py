"""Matrix and vector files: plain CSV, one matrix row per line, no header.

Vectors are stored as a single column. Values are written with 17 significant
digits so a save/load round trip reproduces every float64 exactly.
"""

import numpy as np

from .errors import DomainError

__all__ = ["save_matrix", "load_matrix", "save_vector", "load_vector"]

_FMT = "%.17g"


def save_matrix(path, m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    np.savetxt(path, m, delimiter=",", fmt=_FMT)


def load_matrix(path):
    m = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if m.size == 0:
        raise DomainError(f"{path}: empty matrix file")
    return m


def save_vector(path, v):
    v = np.asarray(v, dtype=float).ravel()
    np.savetxt(path, v.reshape(-1, 1), delimiter=",", fmt=_FMT)


def load_vector(path):
    m = load_matrix(path)
    if m.shape[1] != 1:
        raise DomainError(f"{path}: expected a single-column vector file, got {m.shape[1]} columns")
    return m[:, 0].copy()
