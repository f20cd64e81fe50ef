"""Detector service: open-vocabulary detection behind a line-JSON protocol."""

__version__ = "0.1.0"

from .protocol import ProtocolViolation, make_response, parse_request, serialize_response
from .service import ServiceConfig, handle_detect, handle_line, serve
