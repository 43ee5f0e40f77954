"""Kernel compilation switch.

Hot loops are written once, in plain Python over numpy arrays, and decorated
with :func:`njit`.  When numba is importable and ``DYNPERC_DISABLE_JIT`` is
unset (or ``0``), they are compiled in nopython mode; otherwise the very same
source runs under the interpreter.  Both paths consume the same
``numpy.random.Generator`` stream, so they produce identical results.
"""

import os

_flag = os.environ.get("DYNPERC_DISABLE_JIT", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

JIT_ENABLED = (_numba is not None) and not _disabled


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged.

    The undecorated function is always reachable as ``func.py_func``.
    """
    if JIT_ENABLED:
        return _numba.njit(cache=True)(func)
    func.py_func = func
    return func
