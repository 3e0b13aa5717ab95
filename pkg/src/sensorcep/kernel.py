"""Backend selection for the rule-matching kernel.

Prefers the compiled extension when it imported cleanly, otherwise falls back
to the pure-Python twin. ``SENSORCEP_KERNEL=pure`` forces the fallback, which
is how the benchmark and the equivalence tests pin a backend.
"""

import os

from . import _kernel_py

if os.environ.get("SENSORCEP_KERNEL") == "pure":
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py

BACKEND: str = _impl.BACKEND
first_match = _impl.first_match
first_match_batch = _impl.first_match_batch

OP_CODES = {"<=": 0, ">": 1, "<": 2, ">=": 3, "==": 4, "!=": 5}


def available_backends():
    """Return the importable kernel modules keyed by backend name."""
    backends = {_kernel_py.BACKEND: _kernel_py}
    try:
        from . import _kernel

        backends[_kernel.BACKEND] = _kernel
    except ImportError:
        pass
    return backends
