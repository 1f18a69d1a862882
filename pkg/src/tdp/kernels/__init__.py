"""Hot attack loops with a compiled core and a pure-numpy fallback.

The compiled extension (``_core``, Cython) is preferred when it imported
cleanly; set ``TDP_PURE_PYTHON=1`` to force the numpy fallback. The two
backends are interchangeable: identical results, different speed. See
``benchmarks/bench_kernels.py`` for a head-to-head timing.
"""

import os

from . import _fallback

if os.environ.get("TDP_PURE_PYTHON"):
    _impl = _fallback
    backend = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        backend = "cython"
    except ImportError:
        _impl = _fallback
        backend = "python"

nearest_row_index = _impl.nearest_row_index
rows_within_box = _impl.rows_within_box
box_lone_occupant_hits = _impl.box_lone_occupant_hits

__all__ = [
    "backend",
    "box_lone_occupant_hits",
    "nearest_row_index",
    "rows_within_box",
]
