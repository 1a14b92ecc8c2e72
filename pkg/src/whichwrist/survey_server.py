"""HTTP capture endpoint for live context self-reports.

Serves the vocabularies, accepts context-entry submissions, and appends them
to the same CSV log the ingest side reads.  Validation is delegated to the
ingest parser so a payload accepted here is by construction a row
parse_context_log accepts later.

Endpoints (all JSON):
  GET  /vocab            -> configured vocabularies and selection limits
  POST /entries          -> validate + append one entry
  GET  /entries/recent?n=K -> the K most recent entries, oldest first
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .config import AROUSAL_LEVELS, MAX_SELECTIONS, WEAR_FLAGS, Vocabularies
from .ingest import (
    ContextEntry,
    IngestError,
    _parse_context_row,
    context_entry_to_row,
    parse_context_log,
)

_HEADER = "timestamp,location,activities,arousal,wear_flag\r\n"

# serializes appends within this process; the single os.write keeps a crash
# from ever leaving a partial row behind
_append_lock = threading.Lock()


class SurveyError(Exception):
    pass


PAYLOAD_KEYS = frozenset({"timestamp", "location", "activities", "arousal", "wear_flag"})


def entry_from_payload(payload: dict, vocab: Vocabularies | None = None,
                       default_timestamp: datetime | None = None) -> ContextEntry:
    """Validated ContextEntry from a JSON submission.

    Missing timestamp falls back to default_timestamp (the server passes its
    receipt time).  Every rejection carries a reason naming the field.
    """
    if not isinstance(payload, dict):
        raise IngestError("payload: expected a JSON object")
    unknown = sorted(set(payload) - PAYLOAD_KEYS)
    if unknown:
        raise IngestError(f"payload: unknown fields {', '.join(unknown)}")

    timestamp = payload.get("timestamp")
    if timestamp is None:
        if default_timestamp is None:
            raise IngestError("payload: timestamp missing and no receipt time available")
        timestamp = default_timestamp.isoformat(sep="T", timespec="seconds")
    elif not isinstance(timestamp, str):
        raise IngestError(f"payload: timestamp must be a string, got {timestamp!r}")

    activities = payload.get("activities") or []
    if not isinstance(activities, list) or not all(isinstance(a, str) for a in activities):
        raise IngestError("payload: activities must be a list of strings")

    location = payload.get("location")
    if location is not None and not isinstance(location, str):
        raise IngestError(f"payload: location must be a string, got {location!r}")

    arousal = payload.get("arousal")
    if arousal is not None and not isinstance(arousal, int):
        raise IngestError(f"payload: arousal must be an integer, got {arousal!r}")

    wear_flag = payload.get("wear_flag")
    if wear_flag is not None and not isinstance(wear_flag, str):
        raise IngestError(f"payload: wear_flag must be a string, got {wear_flag!r}")

    row = {
        "timestamp": timestamp,
        "location": location or "",
        "activities": ";".join(activities),
        "arousal": "" if arousal is None else str(arousal),
        "wear_flag": wear_flag or "",
    }
    return _parse_context_row(row, vocab or Vocabularies(), "payload")


def entry_to_payload(entry: ContextEntry) -> dict:
    return {
        "timestamp": entry.timestamp.isoformat(sep="T", timespec="seconds"),
        "location": entry.location,
        "activities": list(entry.activities),
        "arousal": entry.arousal,
        "wear_flag": entry.wear_flag,
    }


def append_context_entry(entry: ContextEntry, log_path: str | Path) -> bool:
    """Append one entry to the CSV log; returns False for an exact duplicate.

    The row (plus header on first write) goes out in a single os.write to an
    O_APPEND descriptor, so concurrent writers interleave whole rows only.
    """
    path = Path(log_path)
    buf = io.StringIO()
    csv.writer(buf).writerow(context_entry_to_row(entry))
    line = buf.getvalue()
    with _append_lock:
        payload = line
        if path.exists():
            existing = path.read_text(encoding="utf-8")
            if line in _split_rows(existing):
                return False
            if not existing:
                payload = _HEADER + line
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = _HEADER + line
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
        try:
            os.write(fd, payload.encode("utf-8"))
        finally:
            os.close(fd)
    return True


def _split_rows(text: str) -> set:
    return {line + "\r\n" for line in text.replace("\r\n", "\n").split("\n") if line}


class _SurveyHandler(BaseHTTPRequestHandler):
    server: "SurveyServer"

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        if url.path == "/vocab":
            vocab = self.server.vocab
            self._send(200, {
                "locations": list(vocab.locations),
                "activities": list(vocab.activities),
                "arousal_levels": list(AROUSAL_LEVELS),
                "wear_flags": list(WEAR_FLAGS),
                "max_selections": MAX_SELECTIONS,
            })
        elif url.path == "/entries/recent":
            try:
                n = int(parse_qs(url.query).get("n", ["10"])[0])
            except ValueError:
                self._send(400, {"error": "query parameter n must be an integer"})
                return
            log = self.server.log_path
            entries = parse_context_log(log, self.server.vocab) if log.exists() else []
            self._send(200, {"entries": [entry_to_payload(e) for e in entries[-max(n, 0):]]})
        else:
            self._send(404, {"error": f"unknown path {url.path}"})

    def do_POST(self) -> None:  # noqa: N802
        url = urlparse(self.path)
        if url.path != "/entries":
            self._send(404, {"error": f"unknown path {url.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            payload = json.loads(body or b"{}")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"request body is not valid JSON: {exc}"})
            return
        try:
            entry = entry_from_payload(payload, self.server.vocab,
                                       default_timestamp=self.server.clock())
        except IngestError as exc:
            self._send(400, {"error": str(exc)})
            return
        try:
            appended = append_context_entry(entry, self.server.log_path)
        except OSError as exc:
            self._send(500, {"error": f"cannot write context log: {exc}"})
            return
        self._send(201 if appended else 200, {
            "status": "appended" if appended else "duplicate",
            "entry": entry_to_payload(entry),
        })

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass  # request logging off; the CLI prints the bind address once

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:  # noqa: N802
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()


class SurveyServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], log_path: str | Path,
                 vocab: Vocabularies | None = None, clock=None) -> None:
        super().__init__(address, _SurveyHandler)
        self.log_path = Path(log_path)
        self.vocab = vocab or Vocabularies()
        self.clock = clock or datetime.now


def make_server(host: str, port: int, log_path: str | Path,
                vocab: Vocabularies | None = None, clock=None) -> SurveyServer:
    return SurveyServer((host, port), log_path, vocab=vocab, clock=clock)
