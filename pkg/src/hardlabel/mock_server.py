"""In-process HTTP oracle server for integration tests and demos.

Wraps any synthetic oracle spec behind ``POST /classify`` with the JSON
schema used by :class:`hardlabel.oracles.HttpOracle`. The server answers
from a ledger-free oracle instance, so billing stays on the client side.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .oracles import OracleSpec, make_oracle


class MockOracleServer:
    """Serve a synthetic oracle over HTTP on a background thread."""

    def __init__(self, spec: OracleSpec, host: str = "127.0.0.1", port: int = 0):
        self._oracle = make_oracle(spec, ledger=None)
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                if self.path.rstrip("/") != "/classify":
                    self.send_error(404)
                    return
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    data = json.loads(self.rfile.read(length))
                    point = np.asarray(data["input"], dtype=float)
                    label = outer._oracle._label(point)
                except Exception as e:  # noqa: BLE001 - report anything as a 400
                    body = json.dumps({"error": str(e)}).encode()
                    self.send_response(400)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                body = json.dumps({"label": int(label)}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockOracleServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
