"""Python surface over the primevo engine.

The compiled extension lives either inside this package (installed wheels)
or on PYTHONPATH next to the build tree (development runs).
"""

try:
    from ._primevo import *  # noqa: F401,F403
    from ._primevo import __doc__ as _core_doc  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout
    from _primevo import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
