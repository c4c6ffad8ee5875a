"""Block-kernel backends.

The compiled Cython kernel is preferred when its extension module built;
otherwise the NumPy fallback is used. Both consume identical inputs and
produce bit-identical tallies, so the choice only affects speed. Set
``SPMUX_BACKEND=numpy`` or ``SPMUX_BACKEND=compiled`` to force one.
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"numpy": pure}
if _core is not None:
    _BACKENDS["compiled"] = _core


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str | None = None):
    """Resolve a backend module by name, env var, or availability."""
    if name is None:
        name = os.environ.get("SPMUX_BACKEND", "auto")
    if name == "auto":
        name = "compiled" if _core is not None else "numpy"
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        ) from None
