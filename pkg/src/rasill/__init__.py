"""Resource-aware session-typed processes: checker, interpreter and cost monitor."""

from __future__ import annotations

__version__ = "0.1.0"
