"""Backend selection: compiled extension when available, numpy fallback otherwise.

Set ``TRANSPEC_BACKEND=python`` to force the fallback (used by the
benchmark and the cross-backend tests).
"""

import os

from . import _corepy

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_forced = os.environ.get("TRANSPEC_BACKEND", "").strip().lower()
if _forced == "python" or _core is None:
    _impl = _corepy
    backend_name = "python"
else:
    _impl = _core
    backend_name = "compiled"

s1_grid = _impl.s1_grid
qhat_minimize = _impl.qhat_minimize
qhat_curve = _impl.qhat_curve
has_compiled = _core is not None


def get_impl(name):
    """Explicit backend lookup, for benchmarks and equivalence tests."""
    if name == "python":
        return _corepy
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend not built")
        return _core
    raise KeyError(name)
