"""Pipeline graph nodes.

Each node takes the run state and returns the keys it updates.  Nodes never let a
domain error escape: :func:`guarded` records it under ``error`` / ``error_module``
and the graph routes the run to ``RecordFailure``.
"""

from __future__ import annotations

import functools
import logging
from typing import Any, Callable, Dict

from sparsechoice.errors import SparseChoiceError

logger = logging.getLogger(__name__)

Node = Callable[[Dict[str, Any]], Dict[str, Any]]


def guarded(module: str) -> Callable[[Node], Node]:
    def wrap(fn: Node) -> Node:
        @functools.wraps(fn)
        def node(state: Dict[str, Any]) -> Dict[str, Any]:
            try:
                return fn(state)
            except (SparseChoiceError, ValueError, ArithmeticError) as exc:
                origin = getattr(exc, "module", module)
                logger.debug("run %s failed in %s: %s", state.get("run"), origin, exc)
                return {"error": str(exc), "error_module": origin}

        return node

    return wrap
