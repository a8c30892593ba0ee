"""Shared fixtures: shipped data paths and small local HTTP servers."""
from __future__ import annotations

import json
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kbqa_env import data_path, load_triples  # noqa: E402
from oracles import read_triples  # noqa: E402

IRI = "http://kb.test/"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(str(data_path("fixture_kb1.txt"))).parent


@pytest.fixture(scope="session")
def fixture_text(data_dir) -> str:
    return (data_dir / "fixture_kb1.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def random_text(data_dir) -> str:
    return (data_dir / "random_kb.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def fixture_kb(fixture_text):
    return load_triples(fixture_text)


@pytest.fixture(scope="session")
def random_kb_loaded(random_text):
    return load_triples(random_text)


def _serve(handler_cls):
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler_cls)
    server.daemon_threads = True
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    return server, f"http://127.0.0.1:{server.server_address[1]}/"


class _Quiet(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _send(self, code, body: bytes, ctype="application/json"):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def _rdf_graph(texts):
    from rdflib import Graph, Literal, URIRef

    g = Graph()
    for text in texts:
        for h, r, t in read_triples(text):
            obj = Literal(t[1:-1]) if t.startswith('"') else URIRef(IRI + t)
            g.add((URIRef(IRI + h), URIRef(IRI + r), obj))
    return g


@pytest.fixture(scope="session")
def sparql_endpoint(fixture_text):
    """A conformant SPARQL endpoint (rdflib) loaded with the fixture KB."""
    pytest.importorskip("rdflib")
    graph = _rdf_graph([fixture_text])
    lock = threading.Lock()

    class Handler(_Quiet):
        def _answer(self, query):
            try:
                with lock:
                    body = graph.query(query).serialize(format="json")
            except Exception as e:  # report engine errors as HTTP 400
                self._send(400, str(e).encode(), "text/plain")
                return
            self._send(200, body, "application/sparql-results+json")

        def do_GET(self):
            self._answer(parse_qs(urlparse(self.path).query)["query"][0])

        def do_POST(self):
            n = int(self.headers.get("Content-Length", 0))
            self._answer(parse_qs(self.rfile.read(n).decode())["query"][0])

    server, url = _serve(Handler)
    yield url
    server.shutdown()


@pytest.fixture(scope="session")
def random_endpoint(random_text):
    pytest.importorskip("rdflib")
    graph = _rdf_graph([random_text])
    lock = threading.Lock()

    class Handler(_Quiet):
        def do_POST(self):
            n = int(self.headers.get("Content-Length", 0))
            query = parse_qs(self.rfile.read(n).decode())["query"][0]
            with lock:
                body = graph.query(query).serialize(format="json")
            self._send(200, body, "application/sparql-results+json")

    server, url = _serve(Handler)
    yield url
    server.shutdown()


class ChatServer:
    """Replies with ``replies[i]`` on the i-th assistant turn of the conversation."""

    def __init__(self, replies, status=200, raw=None):
        self.replies = list(replies)
        self.status = status
        self.raw = raw
        self.requests = []

    def __call__(self):
        owner = self

        class Handler(_Quiet):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(n)
                if owner.raw is not None:
                    self._send(owner.status, owner.raw)
                    return
                payload = json.loads(body)
                owner.requests.append(payload)
                k = sum(1 for m in payload["messages"] if m["role"] == "assistant")
                text = owner.replies[min(k, len(owner.replies) - 1)]
                body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
                self._send(owner.status, json.dumps(body).encode())

        return Handler


@pytest.fixture
def chat_server():
    """Factory: ``url, state = chat_server(replies, status=..., raw=...)``."""
    servers = []

    def make(replies=("",), status=200, raw=None):
        state = ChatServer(replies, status, raw)
        server, url = _serve(state())
        servers.append(server)
        return url, state

    yield make
    for s in servers:
        s.shutdown()


@pytest.fixture
def slow_server():
    """Accepts requests and answers only after ``delay`` seconds."""
    servers = []

    def make(delay=2.0):
        class Handler(_Quiet):
            def do_POST(self):
                time.sleep(delay)
                try:
                    self._send(200, b"{}")
                except OSError:
                    pass

            do_GET = do_POST

        server, url = _serve(Handler)
        servers.append(server)
        return url

    yield make
    for s in servers:
        s.shutdown()
