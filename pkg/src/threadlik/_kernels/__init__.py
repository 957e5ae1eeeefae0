"""Hot-loop kernels with two interchangeable lanes.

The compiled Cython lane (``_speedups``) is used when the extension built;
otherwise the numpy lane (``_pure``) takes over.  Setting the environment
variable ``THREADLIK_PURE_PYTHON=1`` forces the fallback, which is what the
cross-lane equivalence tests and the benchmark harness rely on.
"""

import os

from . import _pure

PHI_FLOOR = _pure.PHI_FLOOR

if os.environ.get("THREADLIK_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

IMPL = _impl.IMPL

flatten_steps = _impl.flatten_steps
nll_grad = _impl.nll_grad
nll_per_thread = _impl.nll_per_thread
sample_block = _impl.sample_block
evolution_thread = _impl.evolution_thread
depths_flat = _impl.depths_flat
subtree_sizes_flat = _impl.subtree_sizes_flat
final_degrees_flat = _impl.final_degrees_flat

__all__ = [
    "IMPL",
    "PHI_FLOOR",
    "flatten_steps",
    "nll_grad",
    "nll_per_thread",
    "sample_block",
    "evolution_thread",
    "depths_flat",
    "subtree_sizes_flat",
    "final_degrees_flat",
]
