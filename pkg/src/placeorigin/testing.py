"""In-process mock backends: a SPARQL endpoint over rdflib, an encoder service and a scripted generator.

Used by the test-suite and the demos; ``rdflib`` is only needed for
:class:`MockSparqlServer`.
"""
from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable
from urllib.parse import parse_qs, urlparse

from .encoders import HashEncoder
from .generate import render_completion


class _Server:
    """Runs a handler function on a background HTTP server bound to localhost."""

    def __init__(self):
        self.requests = 0
        self.fail_statuses: list[int] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _dispatch(self, body: bytes):
                with outer._lock:
                    outer.requests += 1
                    status = outer.fail_statuses.pop(0) if outer.fail_statuses else None
                if status is not None:
                    self.send_response(status)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                try:
                    code, ctype, payload = outer.handle(self.path, self.headers, body)
                except Exception as exc:  # surfaced to the client as a 500
                    code, ctype, payload = 500, "text/plain", str(exc).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._dispatch(b"")

            def do_POST(self):
                n = int(self.headers.get("Content-Length") or 0)
                self._dispatch(self.rfile.read(n))

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/"

    def handle(self, path, headers, body):  # pragma: no cover - overridden
        raise NotImplementedError

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def _json(obj) -> tuple[int, str, bytes]:
    return 200, "application/json", json.dumps(obj).encode("utf-8")


class MockSparqlServer(_Server):
    """SPARQL protocol endpoint answering SELECT queries from an rdflib graph."""

    def __init__(self, graph=None, ntriples: str | None = None, result_format: str = "json"):
        super().__init__()
        import rdflib

        self.graph = graph if graph is not None else rdflib.Graph()
        if ntriples:
            self.graph.parse(data=ntriples, format="nt")
        self.result_format = result_format
        self.queries: list[str] = []
        self._query_lock = threading.Lock()

    def handle(self, path, headers, body):
        params = parse_qs(urlparse(path).query)
        if body:
            ctype = headers.get("Content-Type", "")
            if "application/sparql-query" in ctype:
                params["query"] = [body.decode("utf-8")]
            else:
                params.update(parse_qs(body.decode("utf-8")))
        query = params.get("query", [""])[0]
        # rdflib's query parser is not thread-safe
        with self._query_lock:
            self.queries.append(query)
            result = self.graph.query(query)
            if self.result_format == "xml":
                return 200, "application/sparql-results+xml", result.serialize(format="xml")
            return 200, "application/sparql-results+json", result.serialize(format="json")


class MockEncoderServer(_Server):
    """Encoder service backed by :class:`HashEncoder`."""

    def __init__(self, dim: int = 64, max_length: int = 256, seed: int = 0):
        super().__init__()
        self.encoder = HashEncoder(dim, max_length, seed)

    def handle(self, path, headers, body):
        texts = json.loads(body)["texts"]
        mats = [self.encoder.encode(t).tolist() for t in texts]
        counts = [len(self.encoder.words(t)) for t in texts]
        return _json({"matrices": mats, "token_counts": counts})


_HEADER_RE = re.compile(r"^\[([^\]\n]+)\]$", re.M)


def pick_last_extract(prompt: str) -> str | None:
    names = _HEADER_RE.findall(prompt)
    return names[-1] if names else None


def answer_from_subject(name: str) -> str:
    local = name.split(":", 1)[-1].rsplit("/", 1)[-1]
    local = re.sub(r"_\(.*\)$", "", local)
    return local.replace("_", " ").strip()


class ScriptedGenerator(_Server):
    """Generation backend that picks the extract nearest the prompt's end.

    ``script`` may map a prompt to a completion to override the default rule.
    """

    def __init__(self, script: Callable[[str], str] | None = None, context_limit: int | None = None):
        super().__init__()
        self.script = script
        self.context_limit = context_limit
        self.prompts: list[str] = []

    def handle(self, path, headers, body):
        req = json.loads(body)
        prompt = req["prompt"]
        self.prompts.append(prompt)
        if self.context_limit is not None and len(prompt.split()) > self.context_limit:
            return 413, "application/json", b'{"error": "context_overflow"}'
        if self.script is not None:
            return _json({"text": self.script(prompt)})
        choice = pick_last_extract(prompt)
        if choice is None:
            return _json({"text": "There is no relevant information to answer the question."})
        return _json({"text": render_completion(choice, answer_from_subject(choice))})


def graph_from_triples(triples: Iterable) -> "object":
    """rdflib graph holding :class:`~placeorigin.rdfxml.Triple` objects."""
    import rdflib

    g = rdflib.Graph()
    for t in triples:
        o = (rdflib.URIRef(t.object) if t.object_is_uri
             else rdflib.Literal(t.object, lang=t.object_lang,
                                 datatype=rdflib.URIRef(t.datatype) if t.datatype else None))
        g.add((rdflib.URIRef(t.subject), rdflib.URIRef(t.predicate), o))
    return g
