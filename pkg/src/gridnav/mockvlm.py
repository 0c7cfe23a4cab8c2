"""Local stand-in for a chat-completions endpoint that replays canned replies.

    with MockVlmServer(["turn left", (500, "oops")]) as srv:
        cfg = VlmConfig(srv.url)

Each reply is a string (wrapped as a 200 completion), a ``(status, body)``
tuple sent as-is, or a callable taking the request JSON and returning either.
The last reply repeats once the list runs out.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Sequence, Union

Reply = Union[str, tuple, Callable]


def completion(content: str) -> str:
    return json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})


class MockVlmServer:
    def __init__(self, replies: Sequence[Reply] = ("stop",), host: str = "127.0.0.1"):
        if not replies:
            raise ValueError("need at least one reply")
        self.replies = list(replies)
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, 0), self._handler())
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def _next(self, body):
        with self._lock:
            i = len(self.requests)
            self.requests.append(body)
            reply = self.replies[min(i, len(self.replies) - 1)]
        if callable(reply):
            reply = reply(body)
        if isinstance(reply, tuple):
            return reply
        return 200, completion(reply)

    def _handler(self):
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                try:
                    body = json.loads(raw)
                except ValueError:
                    body = None
                with mock._lock:
                    mock.headers.append(dict(self.headers))
                status, text = mock._next(body)
                data = text.encode() if isinstance(text, str) else text
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        return Handler

    def start(self) -> "MockVlmServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
