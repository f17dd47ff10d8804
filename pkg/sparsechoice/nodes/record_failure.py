from __future__ import annotations
import logging
from typing import Any, Dict

from sparsechoice.observability import log_event

logger = logging.getLogger(__name__)


def record_failure(state: Dict[str, Any]) -> Dict[str, Any]:
    logger.warning("run %s failed [%s]: %s", state.get("run"), state.get("error_module"), state.get("error"))
    log_event(
        "run.failed",
        {
            "run": state.get("run"),
            "seed": state.get("seed"),
            "module": state.get("error_module"),
            "error": state.get("error"),
        },
    )
    return {}
