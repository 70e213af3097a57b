"""Human triage of pseudo-labeled candidates: session state, durable
decision log, and the HTTP API the browser frontend consumes.

The session holds the candidate queue in memory; every accept/reject is
appended to a JSONL log and fsynced before it is acknowledged, so a
restart replays the log and lands in the identical state. The latest
decision for a candidate wins. The HTTP layer is a thin JSON adapter
over the session plus a PNG endpoint for candidate images and static
serving for the UI bundle.
"""

from __future__ import annotations

import io
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional, Sequence
from urllib.parse import parse_qs, urlparse

from PIL import Image
import numpy as np

from .corpus import MemeRecord, RecordSet
from .engine import PseudoCandidate
from .synth import SynthImage, read_image

VERDICTS = ("accepted", "rejected")
STATUSES = ("pending", "accepted", "rejected")


@dataclass(frozen=True)
class ReviewDecision:
    """One reviewer verdict; the log stores these verbatim."""

    candidate_id: int
    verdict: str
    reviewer: str
    note: Optional[str] = None
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if not self.reviewer:
            raise ValueError("reviewer must be non-empty")

    def to_json_line(self) -> str:
        obj = {
            "candidate_id": self.candidate_id,
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }
        if self.note is not None:
            obj["note"] = self.note
        return json.dumps(obj, sort_keys=True)

    @staticmethod
    def from_json_line(line: str) -> "ReviewDecision":
        obj = json.loads(line)
        return ReviewDecision(
            candidate_id=int(obj["candidate_id"]),
            verdict=obj["verdict"],
            reviewer=obj["reviewer"],
            note=obj.get("note"),
            timestamp=float(obj["timestamp"]),
        )


class ReviewSession:
    """Candidate queue with durable, replayable decisions.

    Writes are serialized through a lock and fsynced to the log before
    the call returns; reads see a consistent latest-wins view.
    """

    def __init__(
        self,
        candidates: Sequence[PseudoCandidate],
        log_path: Optional[str | Path] = None,
    ):
        self._by_id: dict[int, PseudoCandidate] = {}
        self._order: list[PseudoCandidate] = []
        for cand in candidates:
            if cand.record_id in self._by_id:
                raise ValueError(f"duplicate candidate id {cand.record_id}")
            self._by_id[cand.record_id] = cand
            self._order.append(cand)
        self._decisions: dict[int, ReviewDecision] = {}
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path is not None else None
        if self._log_path is not None and self._log_path.exists():
            self._replay(self._log_path)

    def _replay(self, path: Path) -> None:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    decision = ReviewDecision.from_json_line(line)
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad decision line: {exc}") from exc
                if decision.candidate_id not in self._by_id:
                    raise ValueError(
                        f"{path}:{lineno}: decision for unknown candidate {decision.candidate_id}"
                    )
                self._decisions[decision.candidate_id] = decision

    def __len__(self) -> int:
        return len(self._order)

    @property
    def candidates(self) -> tuple[PseudoCandidate, ...]:
        return tuple(self._order)

    def get(self, candidate_id: int) -> PseudoCandidate:
        if candidate_id not in self._by_id:
            raise KeyError(f"unknown candidate {candidate_id}")
        return self._by_id[candidate_id]

    def status(self, candidate_id: int) -> str:
        self.get(candidate_id)
        decision = self._decisions.get(candidate_id)
        return decision.verdict if decision is not None else "pending"

    def decide(
        self,
        candidate_id: int,
        verdict: str,
        reviewer: str,
        note: Optional[str] = None,
        timestamp: Optional[float] = None,
    ) -> ReviewDecision:
        """Record a verdict; the append is durable before this returns."""
        self.get(candidate_id)
        decision = ReviewDecision(
            candidate_id=candidate_id,
            verdict=verdict,
            reviewer=reviewer,
            note=note,
            timestamp=time.time() if timestamp is None else timestamp,
        )
        with self._lock:
            if self._log_path is not None:
                self._log_path.parent.mkdir(parents=True, exist_ok=True)
                with self._log_path.open("a", encoding="utf-8") as fh:
                    fh.write(decision.to_json_line() + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._decisions[candidate_id] = decision
        return decision

    def stats(self) -> dict[str, int]:
        with self._lock:
            verdicts = [d.verdict for d in self._decisions.values()]
        accepted = verdicts.count("accepted")
        rejected = verdicts.count("rejected")
        return {
            "total": len(self._order),
            "pending": len(self._order) - accepted - rejected,
            "accepted": accepted,
            "rejected": rejected,
        }

    def list(
        self,
        status: Optional[str] = None,
        assigned_label: Optional[int] = None,
        page: int = 1,
        page_size: int = 50,
    ) -> tuple[list[PseudoCandidate], int]:
        """One page of candidates (confidence desc, then id) plus the
        filtered total."""
        if status is not None and status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}, got {status!r}")
        if assigned_label is not None and assigned_label not in (0, 1):
            raise ValueError("assigned_label must be 0 or 1")
        if page < 1 or page_size < 1:
            raise ValueError("page and page_size must be positive")
        pool = [
            c
            for c in self._order
            if (assigned_label is None or c.assigned_label == assigned_label)
            and (status is None or self.status(c.record_id) == status)
        ]
        pool.sort(key=lambda c: (-c.confidence, c.record_id))
        start = (page - 1) * page_size
        return pool[start : start + page_size], len(pool)

    def export(self, verdict: str = "accepted") -> RecordSet:
        """Decided candidates as labeled records with source=pseudo."""
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {verdict!r}")
        records = [
            MemeRecord(
                id=c.record_id,
                img=c.img,
                text=c.text,
                label=c.assigned_label,
                source="pseudo",
                confidence=c.confidence,
            )
            for c in self._order
            if self._decisions.get(c.record_id) is not None
            and self._decisions[c.record_id].verdict == verdict
        ]
        return RecordSet(records, name=f"review_{verdict}")

    def export_accepted(self) -> RecordSet:
        return self.export("accepted")


# ---------------------------------------------------------------------------
# Image sources
# ---------------------------------------------------------------------------

ImageSource = Callable[[int], Optional[SynthImage]]


def images_from_dict(images: dict[int, SynthImage]) -> ImageSource:
    return images.get


def images_from_dir(root: str | Path) -> ImageSource:
    """Look up ``{id:07d}.bin`` files under a directory tree."""
    root = Path(root)

    def lookup(record_id: int) -> Optional[SynthImage]:
        for candidate in (root / f"{record_id:07d}.bin", root / "img" / f"{record_id:07d}.bin"):
            if candidate.exists():
                return read_image(candidate)
        return None

    return lookup


def image_png_bytes(image: SynthImage) -> bytes:
    """Grayscale PNG of a synthetic image, upscaled for visibility."""
    grid = np.clip(image.pixels, 0.0, 1.0)
    arr = np.round(grid * 255.0).astype(np.uint8)
    pil = Image.fromarray(arr, mode="L")
    height, width = arr.shape
    scale = max(1, 128 // max(height, width))
    if scale > 1:
        pil = pil.resize((width * scale, height * scale), resample=Image.NEAREST)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}

_FALLBACK_INDEX = """<!doctype html>
<meta charset="utf-8">
<title>review service</title>
<h1>Review service</h1>
<p>No UI bundle is installed. The JSON API lives under
<a href="/api/stats">/api/stats</a>, /api/candidates, /api/export.</p>
"""


def _candidate_json(session: ReviewSession, cand: PseudoCandidate) -> dict:
    return {
        "id": cand.record_id,
        "text": cand.text,
        "img": cand.img,
        "confidence": cand.confidence,
        "assigned_label": cand.assigned_label,
        "status": session.status(cand.record_id),
        "image_url": f"/api/images/{cand.record_id}",
    }


class _Handler(BaseHTTPRequestHandler):
    server_version = "ReviewService/1.0"
    # set per server instance via the factory below
    session: ReviewSession
    image_source: ImageSource
    static_dir: Optional[Path]
    quiet: bool = True

    def log_message(self, fmt, *args):  # noqa: N802
        if not self.quiet:
            super().log_message(fmt, *args)

    # -- plumbing -----------------------------------------------------------

    def _send_json(self, obj, status: int = 200) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    def _send_bytes(self, body: bytes, content_type: str, status: int = 200) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # -- GET ----------------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802
        parsed = urlparse(self.path)
        path = parsed.path
        query = parse_qs(parsed.query)
        try:
            if path == "/api/stats":
                self._send_json(self.session.stats())
            elif path == "/api/candidates":
                self._get_candidates(query)
            elif m := re.fullmatch(r"/api/candidates/(\d+)", path):
                self._get_candidate(int(m.group(1)))
            elif m := re.fullmatch(r"/api/images/(\d+)", path):
                self._get_image(int(m.group(1)))
            elif path == "/api/export":
                self._get_export(query)
            elif path.startswith("/api/"):
                self._send_error_json(404, f"no such endpoint: {path}")
            else:
                self._get_static(path)
        except BrokenPipeError:
            pass

    def _get_candidates(self, query) -> None:
        status = query.get("status", [None])[0]
        label_raw = query.get("label", [None])[0]
        try:
            page = int(query.get("page", ["1"])[0])
            page_size = int(query.get("page_size", ["50"])[0])
            label = None if label_raw in (None, "") else int(label_raw)
            items, total = self.session.list(
                status=status or None, assigned_label=label, page=page, page_size=page_size
            )
        except ValueError as exc:
            self._send_error_json(400, str(exc))
            return
        self._send_json(
            {
                "total": total,
                "page": page,
                "page_size": page_size,
                "items": [_candidate_json(self.session, c) for c in items],
            }
        )

    def _get_candidate(self, candidate_id: int) -> None:
        try:
            cand = self.session.get(candidate_id)
        except KeyError:
            self._send_error_json(404, f"unknown candidate {candidate_id}")
            return
        self._send_json(_candidate_json(self.session, cand))

    def _get_image(self, candidate_id: int) -> None:
        try:
            self.session.get(candidate_id)
        except KeyError:
            self._send_error_json(404, f"unknown candidate {candidate_id}")
            return
        image = self.image_source(candidate_id)
        if image is None:
            self._send_error_json(404, f"no image for candidate {candidate_id}")
            return
        self._send_bytes(image_png_bytes(image), "image/png")

    def _get_export(self, query) -> None:
        verdict = query.get("verdict", ["accepted"])[0]
        try:
            records = self.session.export(verdict)
        except ValueError as exc:
            self._send_error_json(400, str(exc))
            return
        body = "".join(json.dumps(rec.to_json_dict(), sort_keys=True) + "\n" for rec in records)
        self._send_bytes(body.encode("utf-8"), "application/x-ndjson")

    def _get_static(self, path: str) -> None:
        if path in ("", "/"):
            path = "/index.html"
        if self.static_dir is not None:
            root = self.static_dir.resolve()
            target = (root / path.lstrip("/")).resolve()
            if root in target.parents or target == root:
                if target.is_file():
                    ctype = _STATIC_TYPES.get(target.suffix.lower(), "application/octet-stream")
                    self._send_bytes(target.read_bytes(), ctype)
                    return
        if path == "/index.html":
            self._send_bytes(_FALLBACK_INDEX.encode("utf-8"), "text/html; charset=utf-8")
            return
        self._send_error_json(404, f"not found: {path}")

    # -- POST ---------------------------------------------------------------

    def do_POST(self) -> None:  # noqa: N802
        path = urlparse(self.path).path
        m = re.fullmatch(r"/api/candidates/(\d+)/decision", path)
        if not m:
            self._send_error_json(404, f"no such endpoint: {path}")
            return
        candidate_id = int(m.group(1))
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(payload, dict):
                raise ValueError("decision body must be a JSON object")
            verdict = payload.get("verdict")
            reviewer = payload.get("reviewer", "")
            note = payload.get("note")
        except (json.JSONDecodeError, ValueError) as exc:
            self._send_error_json(400, f"bad request body: {exc}")
            return
        try:
            decision = self.session.decide(candidate_id, verdict, reviewer, note=note)
        except KeyError:
            self._send_error_json(404, f"unknown candidate {candidate_id}")
            return
        except ValueError as exc:
            self._send_error_json(400, str(exc))
            return
        self._send_json(
            {
                "ok": True,
                "candidate_id": candidate_id,
                "verdict": decision.verdict,
                "stats": self.session.stats(),
            }
        )


class ReviewServer:
    """ThreadingHTTPServer wrapper; start() serves on a daemon thread."""

    def __init__(
        self,
        session: ReviewSession,
        image_source: Optional[ImageSource] = None,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: Optional[str | Path] = None,
        quiet: bool = True,
    ):
        handler = type(
            "BoundHandler",
            (_Handler,),
            {
                "session": session,
                # staticmethod stops the function from binding as a method
                # when looked up through the handler instance
                "image_source": staticmethod(image_source or (lambda _id: None)),
                "static_dir": Path(static_dir) if static_dir is not None else None,
                "quiet": quiet,
            },
        )
        self.session = session
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.httpd.server_address[:2]
        return str(host), int(port)

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "ReviewServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
