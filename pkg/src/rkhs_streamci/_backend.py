"""Select the compiled core when it is importable, else the numpy fallback.

Set ``RKHS_STREAMCI_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("RKHS_STREAMCI_BACKEND", "").lower() == "python":
    core = _fallback
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = _fallback

BACKEND = core.BACKEND
BACKENDS = {"python": _fallback}
try:
    from . import _core

    BACKENDS["compiled"] = _core
except ImportError:
    pass


def get(name: str | None = None):
    """Return a backend module by name (``None`` gives the import-time choice)."""
    if name is None:
        return core
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
