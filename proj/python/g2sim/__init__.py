"""Three-level antibunching simulation, correlation and fitting."""

from ._g2sim import *  # noqa: F401,F403
from ._g2sim import __version__, Error  # noqa: F401
