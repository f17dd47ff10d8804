from __future__ import annotations
import os, json, time, uuid, threading
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Any

EPISODES_DIR = "state/episodes"

_lock = threading.Lock()
_event_log: Path | None = None

def configure_event_log(path: str | os.PathLike | None) -> None:
    """Send subsequent events to ``path`` (JSON lines); ``None`` restores the dated default."""
    global _event_log
    _event_log = Path(path) if path is not None else None
    if _event_log is not None:
        _event_log.parent.mkdir(parents=True, exist_ok=True)

def _events_path() -> Path:
    if _event_log is not None:
        return _event_log
    d = Path(EPISODES_DIR) / time.strftime("%Y%m%d")
    d.mkdir(parents=True, exist_ok=True)
    return d / "events.jsonl"

def _jsonable(value: Any) -> Any:
    # numpy scalars and arrays reach here from solver diagnostics
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)

def log_event(event: str, payload: Dict[str, Any] | None = None) -> None:
    entry = {
        "ts": int(time.time()),
        "event": event,
        "payload": payload or {}
    }
    line = json.dumps(entry, default=_jsonable)
    with _lock:
        with open(_events_path(), "a", encoding="utf-8") as f:
            f.write(line + "\n")

@contextmanager
def span(name: str, attrs: Dict[str, Any] | None = None):
    sid = str(uuid.uuid4())
    start = time.time()
    log_event("span.start", {"id": sid, "name": name, "attrs": attrs or {}})
    try:
        yield sid
        dur = time.time() - start
        log_event("span.end", {"id": sid, "name": name, "duration_s": dur})
    except Exception as e:
        dur = time.time() - start
        log_event("span.error", {"id": sid, "name": name, "duration_s": dur, "error": str(e)})
        raise
