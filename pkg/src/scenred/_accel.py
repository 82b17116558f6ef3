"""Backend switch for the hot numeric kernels.

Set ``SCENRED_NUMBA=0`` in the environment before import to force the
pure-numpy kernels. Both backends make identical pivoting decisions, so work
counts agree across them.
"""
import os

_flag = os.environ.get("SCENRED_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba  # noqa: F401

    USE_NUMBA = True
except ImportError:
    USE_NUMBA = False


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
