"""MIL video anomaly detection on precomputed clip features."""

from milthrow._core import *  # noqa: F401,F403
from milthrow._core import __version__  # noqa: F401
