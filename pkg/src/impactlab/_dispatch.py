"""Backend selection for the hot kernels.

The compiled extension is preferred when importable; setting
IMPACTLAB_PURE_PYTHON=1 forces the numpy fallback (useful for benchmarking
and for cross-checking the two implementations).
"""

import os

_forced = os.environ.get("IMPACTLAB_PURE_PYTHON", "").strip() not in ("", "0")

if _forced:
    from . import _hot_py as hot
else:
    try:
        from . import _hot as hot  # type: ignore[no-redef]
    except ImportError:
        from . import _hot_py as hot  # type: ignore[no-redef]

BACKEND = hot.BACKEND_NAME


def backend_name():
    """Name of the active kernel backend: 'compiled' or 'pure'."""
    return BACKEND
