"""Hot kernels: posit array codecs and the dancing-links search.

The compiled extension ``_ext`` is used when it was built; otherwise the
pure-Python ``_pure`` module is used. Setting ``TINYQUANT_PURE_PYTHON=1``
forces the fallback.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("TINYQUANT_PURE_PYTHON", "") not in ("", "0"):
    backend = _pure
else:
    try:
        from . import _ext as backend  # type: ignore[no-redef]
    except ImportError:
        backend = _pure

BACKEND = "compiled" if backend is not _pure else "python"

__all__ = ["BACKEND", "backend"]
