#!/usr/bin/env python3
"""
Human review over HTTP
======================

High-confidence pseudo-labels are not automatically trustworthy: a
model that memorized its small training set will happily put extreme
probabilities on pool records it knows nothing about. The review
service puts a human between the threshold filter and stage S3. It
serves candidates plus their images over a small JSON API, records
every verdict in an append-only log (fsynced before the ack), and can
replay that log after a restart.

This demo drives the API the way the browser UI would: list, look,
decide, export. Pass --serve to keep the server running afterwards and
click through the bundled web UI yourself.

Run it:  python3 demos/04_review_service.py [--serve]
"""

import json
import sys
import tempfile
import urllib.request
from pathlib import Path

from memefusion.engine import PseudoCandidate
from memefusion.review import ReviewServer, ReviewSession, images_from_dict
from memefusion.synth import SynthSpec, generate_corpus


def get_json(url):
    with urllib.request.urlopen(url) as resp:
        return json.loads(resp.read().decode("utf-8"))


def post_json(url, payload):
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"}, method="POST",
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read().decode("utf-8"))


# ---------------------------------------------------------------------------
# Candidates to review
# ---------------------------------------------------------------------------
# In the real pipeline these come from filter_pseudo over pool
# probabilities; here a few records from a generated corpus stand in.

corpus = generate_corpus(SynthSpec(n_train=12, n_dev=0, n_test=0, noise=0.1, seed=21))
candidates = [
    PseudoCandidate(
        record_id=rec.id,
        confidence=0.995 + 0.0004 * i,
        assigned_label=rec.label,
        text=rec.text,
        img=rec.img,
    )
    for i, rec in enumerate(corpus.train.records)
]

log_path = Path(tempfile.mkdtemp()) / "decisions.jsonl"
session = ReviewSession(candidates, log_path=log_path)
server = ReviewServer(session, image_source=images_from_dict(corpus.images)).start()
print(f"serving {len(session)} candidates at {server.url}")
print(f"decision log: {log_path}\n")

# ---------------------------------------------------------------------------
# Drive the API
# ---------------------------------------------------------------------------

stats = get_json(f"{server.url}/api/stats")
print(f"stats before review: {stats}")

page = get_json(f"{server.url}/api/candidates?page=1&page_size=3")
print("highest-confidence candidates first:")
for cand in page["items"]:
    print(f"  #{cand['id']}  conf={cand['confidence']:.4f}  label={cand['assigned_label']}  {cand['text']!r}")

# Decide: accept the assigned-positive candidates, reject the rest.
for cand in get_json(f"{server.url}/api/candidates?page=1&page_size=100")["items"]:
    verdict = "accepted" if cand["assigned_label"] == 1 else "rejected"
    post_json(f"{server.url}/api/candidates/{cand['id']}/decision",
              {"verdict": verdict, "reviewer": "demo"})

stats = get_json(f"{server.url}/api/stats")
print(f"\nstats after review: {stats}")

# Export the survivors as training-ready records (source=pseudo).
with urllib.request.urlopen(f"{server.url}/api/export?verdict=accepted") as resp:
    exported = [json.loads(line) for line in resp.read().decode("utf-8").strip().splitlines()]
print(f"exported {len(exported)} accepted records; first: {exported[0]}")

# ---------------------------------------------------------------------------
# Durability: replay the log into a fresh session
# ---------------------------------------------------------------------------

server.stop()
replayed = ReviewSession(candidates, log_path=log_path)
print(f"\nafter restart, replayed stats: {replayed.stats()}")
print(f"log holds {sum(1 for _ in log_path.open())} decision lines (one per verdict posted)")

if "--serve" in sys.argv[1:]:
    server = ReviewServer(replayed, image_source=images_from_dict(corpus.images))
    print(f"\nreview UI at {server.url} (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
