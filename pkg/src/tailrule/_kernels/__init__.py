"""Backend selection for the two hot numerical kernels.

The compiled extension is preferred when importable; the numpy reference
implementation is the fallback. Set TAILRULE_KERNEL=python (or =compiled)
to force a backend; forcing the compiled one raises if it is missing.
"""

import os

from . import _purepy

PENALTY_L2 = _purepy.PENALTY_L2
PENALTY_L1 = _purepy.PENALTY_L1
PENALTY_QUAD = _purepy.PENALTY_QUAD

_forced = os.environ.get("TAILRULE_KERNEL", "").strip().lower()


def _load_compiled():
    from . import _core

    for symbol in ("BACKEND", "solve_surrogate_subproblem", "lasso_cd"):
        if not hasattr(_core, symbol):
            raise ImportError(f"compiled kernel module is missing {symbol}; rebuild the extension")
    return _core


if _forced in ("python", "purepy", "pure"):
    _impl = _purepy
elif _forced in ("compiled", "cython", "c"):
    _impl = _load_compiled()
else:
    if _forced:
        raise ImportError(
            f"TAILRULE_KERNEL={_forced!r} not recognized; use 'compiled' or 'python'"
        )
    try:
        _impl = _load_compiled()
    except ImportError:
        _impl = _purepy

BACKEND = _impl.BACKEND
solve_surrogate_subproblem = _impl.solve_surrogate_subproblem
lasso_cd = _impl.lasso_cd


def backends():
    """Importable backends, by name. Always includes 'python'."""
    out = {"python": _purepy}
    try:
        out["compiled"] = _load_compiled()
    except ImportError:
        pass
    return out
