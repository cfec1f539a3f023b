"""Multi-agent performative prediction dynamics (exponentiated gradient)."""

from ._perfdyn import *  # noqa: F401,F403
from ._perfdyn import __version__  # noqa: F401
