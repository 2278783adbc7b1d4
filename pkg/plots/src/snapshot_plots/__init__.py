"""Contour rendering for surfvort CSV field snapshots."""

from .render import SnapshotFormatError, read_snapshot, render

__all__ = ["SnapshotFormatError", "read_snapshot", "render"]
