"""Solver kernel selection: compiled extension if built, numpy fallback otherwise.

Set TRANSINEQ_FORCE_FALLBACK=1 to skip the extension (used by the benchmark
and the backend-agreement tests).
"""

import os

if os.environ.get("TRANSINEQ_FORCE_FALLBACK") == "1":
    from .fallback import IMPL, SimplexStall, solve_transport
else:
    try:
        from ._simplex import IMPL, SimplexStall, solve_transport  # type: ignore[attr-defined]
    except ImportError:
        from .fallback import IMPL, SimplexStall, solve_transport

__all__ = ["solve_transport", "SimplexStall", "IMPL"]
