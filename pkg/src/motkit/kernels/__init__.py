"""Hot numeric kernels with a compiled core and a pure fallback.

The Cython extension ``motkit.kernels._native`` is preferred when it
imported successfully; otherwise the numpy/pure-Python implementations in
``reference`` are used. Set the environment variable
``MOTKIT_DISABLE_NATIVE=1`` to force the fallback. Both backends implement
the same algorithms with the same tie-breaking, so results do not depend
on which one is active.
"""

import os

from . import reference

_native = None
if not os.environ.get("MOTKIT_DISABLE_NATIVE"):
    try:
        from . import _native  # type: ignore[no-redef]
    except ImportError:
        _native = None

_impl = _native if _native is not None else reference

conv_causal_forward = _impl.conv_causal_forward
conv_causal_backward = _impl.conv_causal_backward
iou_matrix = _impl.iou_matrix
solve_assignment = _impl.solve_assignment


def active_backend() -> str:
    """Name of the kernel backend selected at import ('native' or 'reference')."""
    return "native" if _impl is not reference else "reference"


def available_backends():
    """Mapping of backend name to module, for parity tests and benchmarks."""
    out = {"reference": reference}
    if _native is not None:
        out["native"] = _native
    return out
