"""Nonlinear SVD construction, SVD networks and lifted-space attacks."""

from ._nlsvd import *  # noqa: F401,F403
from ._nlsvd import NlsvdError, __version__

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
