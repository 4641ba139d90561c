"""Tiny blocking WebSocket client, used by tests and scripted operators."""
from __future__ import annotations

import base64
import os
import socket

from .wsserver import WsError, make_frame, read_frame


class WsClient:
    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(os.urandom(16)).decode()
        self.sock.sendall(
            (
                f"GET / HTTP/1.1\r\nHost: {host}:{port}\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
            ).encode()
        )
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise WsError("server closed during handshake")
            data += chunk
        if b"101" not in data.split(b"\r\n", 1)[0]:
            raise WsError(f"handshake rejected: {data[:80]!r}")

    def send_text(self, text: str) -> None:
        self.sock.sendall(make_frame(0x1, text.encode("utf-8"), mask=True))

    def recv_text(self, timeout: float | None = None) -> str:
        if timeout is not None:
            self.sock.settimeout(timeout)
        while True:
            opcode, payload = read_frame(self.sock)
            if opcode == 0x1:
                return payload.decode("utf-8")
            if opcode == 0x8:
                raise WsError("server closed")

    def close(self) -> None:
        try:
            self.sock.sendall(make_frame(0x8, b""))
        except OSError:
            pass
        self.sock.close()
