"""Single round-robin scheduling: relaxations, cuts, and branch-and-price."""

from __future__ import annotations

__version__ = "0.1.0"
