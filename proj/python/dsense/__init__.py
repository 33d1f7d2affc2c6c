"""Sensitivity analysis and design sensitivity for weighted observational studies.

Thin wrapper over the compiled core; see the project README for the CLI and
the full API surface.
"""

try:
    # installed layout: the extension lives inside the package
    from ._dsense import *  # noqa: F401,F403
except ImportError:
    # build-tree layout: the extension sits on PYTHONPATH next to the package
    from _dsense import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
