"""Telemetry service bridging the training loop and connected consoles.

The training loop calls `publish_frame` after every environment step and
`poll_commands` at step boundaries; commands never apply mid-step. With no
client connected the service is inert: publishing touches no RNG and
produces no observable change in the run, and a client disconnect simply
reverts intervention control to the scripted operator.
"""
from __future__ import annotations

import queue
import threading

import numpy as np

from ..sim.state import FrameSnapshot
from .protocol import (
    ProtocolViolation,
    decode_client,
    encode,
    error_message,
    frame_message,
    metrics_message,
)
from .wsserver import ClientSession, WsServer


class TelemetryService:
    def __init__(self, port: int = 0, host: str = "127.0.0.1"):
        self._commands: queue.Queue[dict] = queue.Queue()
        self._lock = threading.Lock()
        self._twist = np.zeros(3)
        self._takeover_client: int | None = None
        self.server = WsServer(port, self._on_message, host=host)
        self.port = self.server.port

    # -- client side ------------------------------------------------------
    def _on_message(self, session: ClientSession, text: str) -> None:
        try:
            msg = decode_client(text)
        except ProtocolViolation as e:
            self.server.send_to(session, encode(error_message(str(e))))
            return
        mtype = msg["type"]
        with self._lock:
            if mtype == "takeover_on":
                if self._takeover_client is None:
                    self._takeover_client = session.client_id
                elif self._takeover_client != session.client_id:
                    self.server.send_to(
                        session, encode(error_message("takeover already held"))
                    )
                    return
            elif mtype == "takeover_off":
                if self._takeover_client == session.client_id:
                    self._takeover_client = None
                    self._twist = np.zeros(3)
            elif mtype == "twist":
                if self._takeover_client != session.client_id:
                    self.server.send_to(
                        session, encode(error_message("twist without takeover"))
                    )
                    return
                self._twist = np.asarray(msg["twist"], dtype=np.float64)
        self._commands.put(msg)

    # -- training-loop side ------------------------------------------------
    def poll_commands(self) -> list[dict]:
        out = []
        while True:
            try:
                out.append(self._commands.get_nowait())
            except queue.Empty:
                break
        # a vanished takeover client reverts control to the scripted operator
        with self._lock:
            if self._takeover_client is not None:
                ids = {c.client_id for c in self.server.clients()}
                if self._takeover_client not in ids:
                    self._takeover_client = None
                    self._twist = np.zeros(3)
                    out.append({"type": "takeover_off", "reason": "disconnect"})
        return out

    def has_takeover(self) -> bool:
        with self._lock:
            return self._takeover_client is not None

    def latest_twist(self) -> np.ndarray:
        with self._lock:
            return self._twist.copy()

    def publish_frame(self, snapshot: FrameSnapshot, extra: dict | None = None) -> None:
        import json

        msg = frame_message(json.loads(snapshot.to_json()), extra=extra)
        self.server.broadcast(encode(msg))

    def publish_metrics(self, values: dict) -> None:
        self.server.broadcast(encode(metrics_message(values)))

    def close(self) -> None:
        self.server.close()
