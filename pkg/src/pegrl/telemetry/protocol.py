"""Wire message schemas for the live telemetry/intervention channel.

Transport is WebSocket text frames (each frame length-prefixed by the frame
header); every payload is a single JSON object carrying a mandatory
schema_version and type. Server to client: frame, metrics, error. Client to
server: takeover_on, takeover_off, twist, label. Field-by-field reference
lives in PROTOCOL.md at the repository root.
"""
from __future__ import annotations

import json

PROTOCOL_SCHEMA_VERSION = 1

SERVER_TYPES = ("frame", "metrics", "error")
CLIENT_TYPES = ("takeover_on", "takeover_off", "twist", "label")


class ProtocolViolation(ValueError):
    pass


def encode(msg: dict) -> str:
    if "type" not in msg:
        raise ProtocolViolation("message lacks a type")
    payload = dict(msg)
    payload.setdefault("schema_version", PROTOCOL_SCHEMA_VERSION)
    return json.dumps(payload, sort_keys=True)


def decode_client(raw: str) -> dict:
    """Parse and validate one client message; raises ProtocolViolation."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ProtocolViolation(f"not valid JSON: {e}") from e
    if not isinstance(msg, dict):
        raise ProtocolViolation("message must be a JSON object")
    if msg.get("schema_version") != PROTOCOL_SCHEMA_VERSION:
        raise ProtocolViolation(
            f"unsupported schema_version {msg.get('schema_version')!r}"
        )
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        raise ProtocolViolation(f"unknown client message type {mtype!r}")
    if mtype == "twist":
        twist = msg.get("twist")
        if (
            not isinstance(twist, (list, tuple))
            or len(twist) != 3
            or not all(isinstance(v, (int, float)) for v in twist)
        ):
            raise ProtocolViolation("twist must be [dx, dz, dtheta]")
    if mtype == "label" and msg.get("outcome") not in ("success", "failure"):
        raise ProtocolViolation("label outcome must be 'success' or 'failure'")
    return msg


def frame_message(snapshot_dict: dict, extra: dict | None = None) -> dict:
    msg = {"type": "frame", **snapshot_dict}
    if extra:
        msg.update(extra)
    return msg


def metrics_message(values: dict) -> dict:
    return {"type": "metrics", **values}


def error_message(reason: str) -> dict:
    return {"type": "error", "reason": reason}
