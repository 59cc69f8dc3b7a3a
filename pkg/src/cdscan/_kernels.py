"""Pick the scan kernel at import: compiled extension if built, else pure Python.

Set ``CDSCAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("CDSCAN_PURE_PYTHON", "") not in ("", "0"):
    from cdscan._scan_py import scan_lists
else:
    try:
        from cdscan._scan import scan_lists

        BACKEND = "cython"
    except ImportError:  # extension not built
        from cdscan._scan_py import scan_lists

__all__ = ["BACKEND", "scan_lists"]
