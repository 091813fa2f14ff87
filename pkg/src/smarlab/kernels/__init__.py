"""Routing hot loops with a compiled core and a numpy fallback.

The compiled extension is preferred when importable. Set
SMARLAB_KERNELS=py to force the numpy reference, or SMARLAB_KERNELS=c to
insist on the extension (import fails loudly if it is missing).
"""

import os

_requested = os.environ.get("SMARLAB_KERNELS", "").strip().lower()

if _requested in ("py", "python"):
    from smarlab.kernels._pyref import selection_counts, topk_rows
    BACKEND = "python"
elif _requested in ("c", "cython", "ext"):
    from smarlab.kernels._routing import selection_counts, topk_rows
    BACKEND = "cython"
elif _requested == "":
    try:
        from smarlab.kernels._routing import selection_counts, topk_rows
        BACKEND = "cython"
    except ImportError:
        from smarlab.kernels._pyref import selection_counts, topk_rows
        BACKEND = "python"
else:
    raise ValueError(
        f"SMARLAB_KERNELS={_requested!r} not understood; use 'py' or 'c'"
    )

__all__ = ["BACKEND", "selection_counts", "topk_rows"]
