"""Numeric kernel backend selection.

The compiled extension is preferred when importable; the pure-NumPy twin is
used otherwise, or when the environment variable SMILEPC_PURE is set to a
non-empty value.  Both backends expose the same API and agree to roughly
1e-12 relative (summation order differs); results are bit-reproducible for
a fixed backend regardless of BLAS/OMP thread settings.
"""

import os

from . import _pure

_impl = _pure
if not os.environ.get("SMILEPC_PURE"):
    try:
        from . import _compiled as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

BACKEND = "pure" if _impl is _pure else "compiled"

wd_sorted = _impl.wd_sorted
ks_sorted = _impl.ks_sorted
ad_sorted = _impl.ad_sorted
fps_indices = _impl.fps_indices
assign_clusters = _impl.assign_clusters
solve_spd = _impl.solve_spd

__all__ = [
    "BACKEND",
    "ad_sorted",
    "assign_clusters",
    "fps_indices",
    "ks_sorted",
    "solve_spd",
    "wd_sorted",
]
