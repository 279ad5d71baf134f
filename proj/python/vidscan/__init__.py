"""Python bindings for the streaming document-scan capture engine."""

from ._vidscan import *  # noqa: F401,F403
from ._vidscan import __version__  # noqa: F401
