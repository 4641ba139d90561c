from .protocol import (
    CLIENT_TYPES,
    PROTOCOL_SCHEMA_VERSION,
    SERVER_TYPES,
    ProtocolViolation,
    decode_client,
    encode,
    error_message,
    frame_message,
    metrics_message,
)
from .service import TelemetryService
from .wsclient import WsClient
from .wsserver import WsError, WsServer

__all__ = [
    "CLIENT_TYPES",
    "PROTOCOL_SCHEMA_VERSION",
    "ProtocolViolation",
    "SERVER_TYPES",
    "TelemetryService",
    "WsClient",
    "WsError",
    "WsServer",
    "decode_client",
    "encode",
    "error_message",
    "frame_message",
    "metrics_message",
]
