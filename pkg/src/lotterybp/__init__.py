"""Normalized min-sum BP with lottery sign flips, OSD-0 and syndrome vote."""

__version__ = "0.1.0"
