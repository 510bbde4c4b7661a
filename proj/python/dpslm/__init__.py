"""Duration-penalized discrete speech units.

Thin wrapper around the C++ extension module. Works both from an installed
wheel (module inside the package) and from a CMake build tree (module on
PYTHONPATH).
"""

try:
    from ._dpslm import *  # noqa: F401,F403
    from ._dpslm import __version__  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout
    from _dpslm import *  # noqa: F401,F403
    from _dpslm import __version__  # noqa: F401
