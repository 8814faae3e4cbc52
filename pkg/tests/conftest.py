import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from spanseek.synthbench import clean_ranges, generate_suite, saturation_ranges, write_suite


class _ChatHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        self.server.calls += 1
        behavior = self.server.script.pop(0) if self.server.script else "ok"
        user = payload["messages"][-1]["content"]
        if behavior == "ok":
            content = f"Q_a: the lead-in to: {user}\nQ_b: the outcome of: {user}"
        else:
            content = "unable to comply with the requested format"
        body = json.dumps({"choices": [{"message": {"content": content}}]}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class MockChatServer:
    """Scriptable chat-completions endpoint counting its requests."""

    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
        self.httpd.calls = 0
        self.httpd.script = []
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.httpd.server_address[1]}"

    @property
    def calls(self) -> int:
        return self.httpd.calls

    @property
    def script(self) -> list:
        return self.httpd.script

    def shutdown(self):
        self.httpd.shutdown()


@pytest.fixture()
def chat_server():
    server = MockChatServer()
    yield server
    server.shutdown()


@pytest.fixture(scope="session")
def clean_suite(tmp_path_factory):
    """200 single-event cases, noise up to 0.05, about a quarter noiseless."""
    cases = generate_suite(200, clean_ranges(), seed=20240601)
    manifest_path = write_suite(cases, tmp_path_factory.mktemp("clean_suite"))
    return manifest_path, cases


@pytest.fixture(scope="session")
def saturation_suite(tmp_path_factory):
    """100 cases with strong original-channel distractors and clean evidence."""
    cases = generate_suite(100, saturation_ranges(), seed=424242)
    manifest_path = write_suite(cases, tmp_path_factory.mktemp("saturation_suite"))
    return manifest_path, cases
