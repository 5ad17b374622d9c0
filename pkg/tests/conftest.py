import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import pytest

sys.path.insert(0, str(Path(__file__).parent))


class MockQrng:
    """Local stand-in for the remote uint16 service.

    ``mode`` selects the reply: "counter" returns consecutive words,
    "fixed" returns ``words``, "garbage" returns non-JSON and "range"
    returns an out-of-range word.
    """

    def __init__(self):
        self.mode = "counter"
        self.words = []
        self.requests = []
        self._next = 0
        handler = self._handler()
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/random"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def _reply(self, n):
        if self.mode == "fixed":
            return json.dumps({"data": self.words[:n]}).encode()
        if self.mode == "garbage":
            return b"<html>busy</html>"
        if self.mode == "range":
            return json.dumps({"data": [70000] * n}).encode()
        data = [(self._next + i) % 65536 for i in range(n)]
        self._next += n
        return json.dumps({"data": data}).encode()

    def _handler(self):
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                query = parse_qs(urlsplit(self.path).query)
                mock.requests.append(query)
                body = mock._reply(int(query["length"][0]))
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        return Handler

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def qrng_server():
    mock = MockQrng()
    yield mock
    mock.close()


@pytest.fixture
def dead_url():
    # bind then release a port so nothing is listening on it
    import socket

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return f"http://127.0.0.1:{port}/random"


# --- acceptance reporting ---------------------------------------------------

ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    """Record the one-line verdict for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
