"""Minimal WebSocket (RFC 6455) server on the standard library.

Text frames only, one thread per client, bounded outgoing queues with a
latest-wins drop policy so a slow consumer can never stall the training
loop. No TLS, no extensions, no fragmentation support beyond what the
browser sends for these small payloads.
"""
from __future__ import annotations

import base64
import hashlib
import queue
import socket
import struct
import threading

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(RuntimeError):
    pass


def _handshake(conn: socket.socket) -> None:
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = conn.recv(4096)
        if not chunk:
            raise WsError("client closed during handshake")
        data += chunk
        if len(data) > 65536:
            raise WsError("oversized handshake")
    headers = {}
    for line in data.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        raise WsError("missing Sec-WebSocket-Key")
    accept = base64.b64encode(
        hashlib.sha1(key + _WS_GUID.encode()).digest()
    ).decode()
    conn.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode()
    )


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise WsError("connection closed")
        buf += chunk
    return buf


def read_frame(conn: socket.socket) -> tuple[int, bytes]:
    """Returns (opcode, payload); unmasks client frames."""
    head = _recv_exact(conn, 2)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        (length,) = struct.unpack("!H", _recv_exact(conn, 2))
    elif length == 127:
        (length,) = struct.unpack("!Q", _recv_exact(conn, 8))
    if length > 1 << 20:
        raise WsError("frame too large")
    mask = _recv_exact(conn, 4) if masked else b"\x00" * 4
    payload = bytearray(_recv_exact(conn, length))
    if masked:
        for i in range(length):
            payload[i] ^= mask[i % 4]
    return opcode, bytes(payload)


def make_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head.append(mask_bit | n)
    elif n < 1 << 16:
        head.append(mask_bit | 126)
        head += struct.pack("!H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack("!Q", n)
    if mask:
        key = b"\x12\x34\x56\x78"  # client masking key; value irrelevant
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


class ClientSession:
    """One connected console; owns a bounded send queue."""

    def __init__(self, conn: socket.socket, server: "WsServer", client_id: int):
        self.conn = conn
        self.server = server
        self.client_id = client_id
        self.outgoing: queue.Queue[str] = queue.Queue(maxsize=8)
        self.alive = True

    def enqueue(self, text: str) -> None:
        """Latest-wins: drop the oldest waiting frame when full."""
        while True:
            try:
                self.outgoing.put_nowait(text)
                return
            except queue.Full:
                try:
                    self.outgoing.get_nowait()
                except queue.Empty:
                    pass

    def _send_loop(self) -> None:
        try:
            while self.alive:
                try:
                    text = self.outgoing.get(timeout=0.2)
                except queue.Empty:
                    continue
                self.conn.sendall(make_frame(0x1, text.encode("utf-8")))
        except OSError:
            pass
        finally:
            self.alive = False

    def _recv_loop(self) -> None:
        try:
            while self.alive:
                opcode, payload = read_frame(self.conn)
                if opcode == 0x8:  # close
                    break
                if opcode == 0x9:  # ping -> pong
                    self.conn.sendall(make_frame(0xA, payload))
                    continue
                if opcode == 0x1:
                    self.server._on_text(self, payload.decode("utf-8"))
        except (WsError, OSError, UnicodeDecodeError):
            pass
        finally:
            self.alive = False
            self.server._drop(self)
            try:
                self.conn.close()
            except OSError:
                pass


class WsServer:
    """Accepts console connections; hands decoded text to `on_message`."""

    def __init__(self, port: int, on_message, host: str = "127.0.0.1"):
        self.on_message = on_message
        self._clients: list[ClientSession] = []
        self._lock = threading.Lock()
        self._next_id = 0
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(4)
        self.port = self._sock.getsockname()[1]
        self._closing = False
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            try:
                _handshake(conn)
            except WsError:
                conn.close()
                continue
            with self._lock:
                session = ClientSession(conn, self, self._next_id)
                self._next_id += 1
                self._clients.append(session)
            threading.Thread(target=session._send_loop, daemon=True).start()
            threading.Thread(target=session._recv_loop, daemon=True).start()

    def _on_text(self, session: ClientSession, text: str) -> None:
        self.on_message(session, text)

    def _drop(self, session: ClientSession) -> None:
        with self._lock:
            if session in self._clients:
                self._clients.remove(session)

    def clients(self) -> list[ClientSession]:
        with self._lock:
            return list(self._clients)

    def broadcast(self, text: str) -> None:
        for c in self.clients():
            c.enqueue(text)

    def send_to(self, session: ClientSession, text: str) -> None:
        session.enqueue(text)

    def close(self) -> None:
        self._closing = True
        try:
            self._sock.close()
        except OSError:
            pass
        for c in self.clients():
            c.alive = False
            try:
                c.conn.close()
            except OSError:
                pass
